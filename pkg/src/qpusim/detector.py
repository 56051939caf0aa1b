"""Time-domain read-out chain: QPC charge step -> RC -> CDS -> gain -> output.

Sign convention: ``delta_electrons`` is the change of charge-carrier count
seen by the detector; an electron tunnelling away from the QPC is -1 and
gives a negative detector output.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.constants import e as E_CHARGE

from .noise import CdsTiming

__all__ = [
    "QPC_STEP_V",
    "DEFAULT_C_QPC_F",
    "DetectorChainConfig",
    "QpcEvent",
    "DetectorSample",
    "CdsResult",
    "qpc_voltage_step",
    "cds_sample",
    "run_readout",
    "samples_to_csv",
]

QPC_STEP_V = 3.75e-3
DEFAULT_C_QPC_F = E_CHARGE / QPC_STEP_V  # ~42.7 aF


@dataclass(frozen=True)
class DetectorChainConfig:
    gain_sf: float = 0.9
    gain_pre: float = 2.2
    gain_obuf: float = 5.4
    gain_interface: float = 2.0
    chain_gain_total: float | None = 80.0
    rc_pole_hz: float = 70e6
    cds: CdsTiming = field(default_factory=CdsTiming)
    c_qpc_f: float = DEFAULT_C_QPC_F
    event_time_s: float = 130e-9  # default QPC event instant inside a trial

    def __post_init__(self):
        gains = (self.gain_sf, self.gain_pre, self.gain_obuf, self.gain_interface)
        if any(g <= 0 for g in gains):
            raise ValueError("stage gains must be > 0")
        if self.chain_gain_total is not None and self.chain_gain_total <= 0:
            raise ValueError("chain_gain_total must be > 0")
        if self.rc_pole_hz <= 0 or self.c_qpc_f <= 0:
            raise ValueError("rc_pole_hz and c_qpc_f must be > 0")

    @property
    def stage_gain_product(self) -> float:
        return self.gain_sf * self.gain_pre * self.gain_obuf * self.gain_interface

    @property
    def gain(self) -> float:
        """Effective QPC-to-output gain."""
        if self.chain_gain_total is None:
            return self.stage_gain_product
        return self.chain_gain_total

    @property
    def gain_discrepancy(self) -> float:
        """Ratio of the configured total gain to the stage-gain product."""
        return self.gain / self.stage_gain_product

    @property
    def rc_tau_s(self) -> float:
        return 1.0 / (2 * math.pi * self.rc_pole_hz)

    @property
    def s0_time_s(self) -> float:
        return self.cds.tau_sh_s

    @property
    def s1_time_s(self) -> float:
        return self.cds.tau_sh_s + self.cds.lambda_s


@dataclass(frozen=True)
class QpcEvent:
    time_s: float
    delta_electrons: int = -1

    def __post_init__(self):
        if self.delta_electrons == 0:
            raise ValueError("delta_electrons must be non-zero")


@dataclass(frozen=True)
class DetectorSample:
    trial_id: int
    v_out_v: float


@dataclass(frozen=True)
class CdsResult:
    v_s0_v: float
    v_s1_v: float
    difference_v: float
    output_v: float


def qpc_voltage_step(ev: QpcEvent, c_qpc_f: float = DEFAULT_C_QPC_F) -> float:
    if c_qpc_f <= 0:
        raise ValueError("c_qpc_f must be > 0")
    return ev.delta_electrons * E_CHARGE / c_qpc_f


def _rc_step_response(dt, tau):
    dt = np.asarray(dt, dtype=float)
    return np.where(dt > 0, -np.expm1(-np.maximum(dt, 0) / tau), 0.0)


def cds_sample(trace, cds: CdsTiming | None = None, cfg: DetectorChainConfig | None = None) -> CdsResult:
    """Correlated double sample of a piecewise-constant QPC trace.

    ``trace`` is ``(times_s, levels_v)``: each level holds from its time to the
    next; the first time is the trial start and the last marks the end of the
    record.  Both sample instants see the trace through the first-order RC of
    the sampling switch.
    """
    cfg = cfg or DetectorChainConfig()
    cds = cds or cfg.cds
    times, levels = (np.asarray(x, dtype=float) for x in trace)
    if times.size == 0 or times.size != levels.size:
        raise ValueError("trace needs matching, non-empty time and level arrays")
    t0 = times[0]
    s0 = t0 + cds.tau_sh_s
    s1 = s0 + cds.lambda_s
    if np.any(np.diff(times) < 0):
        raise ValueError("trace times must be nondecreasing")
    if times[-1] < s1:
        raise ValueError("trace ends before the S1 sample")
    steps = np.diff(levels)
    tau = cfg.rc_tau_s

    def sample(ts):
        # trace starts settled at its first level
        return levels[0] + float(np.sum(steps * _rc_step_response(ts - times[1:], tau)))

    v0, v1 = sample(s0), sample(s1)
    diff = v1 - v0
    return CdsResult(v0, v1, diff, diff * cfg.gain)


def _cds_gain_for_events(times: np.ndarray, cfg: DetectorChainConfig) -> np.ndarray:
    tau = cfg.rc_tau_s
    return _rc_step_response(cfg.s1_time_s - times, tau) - _rc_step_response(cfg.s0_time_s - times, tau)


def run_readout(
    trials: Sequence[Sequence[QpcEvent]] | int,
    cfg: DetectorChainConfig | None = None,
    noise_rms_v: float = 0.0,
    seed: int = 0,
) -> list[DetectorSample]:
    """Render each trial's QPC events through the chain and add output noise.

    ``trials`` is one event list per trial (an int means that many empty
    trials).  Event times are relative to the trial start.  Noise is drawn
    in trial order from one seeded generator.
    """
    cfg = cfg or DetectorChainConfig()
    if isinstance(trials, int):
        trials = [()] * trials
    n = len(trials)
    v = signal_levels(trials, cfg)
    if noise_rms_v:
        v = v + np.random.default_rng(seed).normal(0.0, noise_rms_v, n)
    return [DetectorSample(i, float(x)) for i, x in enumerate(v)]


def signal_levels(trials: Sequence[Sequence[QpcEvent]], cfg: DetectorChainConfig) -> np.ndarray:
    """Noise-free detector output per trial."""
    out = np.zeros(len(trials))
    step_unit = E_CHARGE / cfg.c_qpc_f
    idx, times, charge = [], [], []
    for i, evs in enumerate(trials):
        for ev in evs:
            idx.append(i)
            times.append(ev.time_s)
            charge.append(ev.delta_electrons)
    if idx:
        w = _cds_gain_for_events(np.asarray(times), cfg)
        np.add.at(out, np.asarray(idx), np.asarray(charge) * step_unit * w * cfg.gain)
    return out


def samples_to_csv(samples: Sequence[DetectorSample]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial_id", "v_out_v"])
    for s in samples:
        w.writerow([s.trial_id, repr(s.v_out_v)])
    return buf.getvalue()
