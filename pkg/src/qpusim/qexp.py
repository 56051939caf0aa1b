"""Monte-Carlo model of the single-electron resonant-tunnelling experiment.

Each trial asks whether one electron tunnels from the QPC into the first
dot.  The answer is drawn from a calibrated logistic dose-response in the
injector step amplitude; successive trials share an AR(1) latent variable so
that nearby trials are mildly correlated.  Tunnel events are rendered through
the detector chain, which turns the 3.75 mV QPC step into a -300 mV output.

A small fraction of non-tunnel trials become "midzone" events: the charge
arrives too close to the second CDS sample for the RC to settle, so the
output lands between the two peaks.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import constants
from scipy.special import expit, ndtr

from .detector import DetectorChainConfig, QpcEvent, qpc_voltage_step, run_readout

__all__ = [
    "TunnelingModel",
    "ExperimentResult",
    "HistogramResult",
    "BiasScanConfig",
    "BiasScanResult",
    "DotParameters",
    "tunneling_probability",
    "run_trials",
    "histogram",
    "extract_probabilities",
    "probability_sweep",
    "bias_scan",
    "autocorrelation",
    "charging_energy",
    "dot_capacitance",
    "thermal_ratio",
    "divider_map",
]

STATE_0, STATE_1, STATE_MID = 0, 1, 2


@dataclass(frozen=True)
class TunnelingModel:
    """Logistic P|1> versus injector step, pinned at two calibration points.

    The curve is ``p_max * expit(slope * (v - v_mid))`` with ``v_mid`` halfway
    between the calibration steps, so ``p_max`` and ``slope`` follow in closed
    form from the two target probabilities.
    """

    v_low_v: float = 33e-3
    v_high_v: float = 78e-3
    p_at_low: float = 0.0025
    p_at_high: float = 0.95
    divider_ratio: float = 0.1
    short_lag_corr: float = 0.3
    midzone_rate: float = 0.02
    midzone_range_v: tuple[float, float] = (-0.29, -0.01)
    noise_rms_v: float = 17.5e-3
    detector: DetectorChainConfig = field(default_factory=DetectorChainConfig)

    def __post_init__(self):
        if not self.v_low_v < self.v_high_v:
            raise ValueError("v_low_v must be below v_high_v")
        if not 0 <= self.p_at_low < self.p_at_high <= 1 or self.p_at_low + self.p_at_high > 1:
            raise ValueError("need 0 <= p_at_low < p_at_high and p_at_low + p_at_high <= 1")
        if not 0 <= self.short_lag_corr < 1:
            raise ValueError("short_lag_corr must be in [0, 1)")
        if not 0 <= self.midzone_rate < 1:
            raise ValueError("midzone_rate must be in [0, 1)")
        if self.noise_rms_v < 0:
            raise ValueError("noise_rms_v must be >= 0")

    @property
    def p_max(self) -> float:
        return self.p_at_low + self.p_at_high

    @property
    def v_mid_v(self) -> float:
        return 0.5 * (self.v_low_v + self.v_high_v)

    @property
    def slope_per_v(self) -> float:
        s = self.p_at_high / self.p_max
        return math.log(s / (1 - s)) / (self.v_high_v - self.v_mid_v)

    @property
    def peak1_v(self) -> float:
        """Nominal |1> output: one electron leaving the QPC."""
        return qpc_voltage_step(QpcEvent(0.0, -1), self.detector.c_qpc_f) * self.detector.gain


def tunneling_probability(step_v, m: TunnelingModel | None = None):
    m = m or TunnelingModel()
    v = np.asarray(step_v, dtype=float)
    if np.any(v < 0):
        raise ValueError("step_v must be >= 0")
    p = m.p_max * expit(m.slope_per_v * (v - m.v_mid_v))
    return float(p) if p.ndim == 0 else p


# ----------------------------------------------------------------- trials


@dataclass(frozen=True)
class ExperimentResult:
    step_v: float
    states: np.ndarray  # 0, 1 or 2 (midzone) per trial
    v_out_v: np.ndarray
    peaks_v: tuple[float, float]  # nominal (|0>, |1>) outputs

    def __len__(self):
        return len(self.v_out_v)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial_id", "state", "v_out_v"])
        for i, (s, v) in enumerate(zip(self.states, self.v_out_v)):
            w.writerow([i, int(s), repr(float(v))])
        return buf.getvalue()


def _ar1_uniforms(n: int, phi: float, rng: np.random.Generator) -> np.ndarray:
    """Marginally uniform draws whose latent normals follow AR(1) with ``phi``."""
    eps = rng.standard_normal(n)
    z = np.empty(n)
    z[0] = eps[0]
    scale = math.sqrt(1 - phi * phi)
    for t in range(1, n):
        z[t] = phi * z[t - 1] + scale * eps[t]
    return ndtr(z)


def _midzone_event_time(weight: np.ndarray, cfg: DetectorChainConfig) -> np.ndarray:
    # event this long before S1 lets the RC reach ``weight`` of the full step
    return cfg.s1_time_s + cfg.rc_tau_s * np.log1p(-weight)


def run_trials(
    m: TunnelingModel,
    step_v: float,
    n: int,
    seed=0,
    p1: float | None = None,
) -> ExperimentResult:
    """Simulate ``n`` trials at one injector step.

    ``p1`` overrides the dose-response (the bias scan uses it to switch
    tunnelling off outside the resonance window).  ``seed`` may be anything
    :class:`numpy.random.SeedSequence` accepts.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    p = tunneling_probability(step_v, m) if p1 is None else float(p1)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    latent_ss, mid_ss, noise_ss = ss.spawn(3)
    u = _ar1_uniforms(n, m.short_lag_corr, np.random.default_rng(latent_ss))
    mid = min(m.midzone_rate, 1 - p)
    states = np.where(u < p, STATE_1, np.where(u < p + mid, STATE_MID, STATE_0))

    cfg = m.detector
    full = abs(m.peak1_v)
    lo, hi = sorted(abs(x) / full for x in m.midzone_range_v)
    n_mid = int(np.count_nonzero(states == STATE_MID))
    weights = np.random.default_rng(mid_ss).uniform(lo, hi, n_mid)
    mid_times = iter(_midzone_event_time(weights, cfg))
    trials = []
    for s in states:
        if s == STATE_1:
            trials.append((QpcEvent(cfg.event_time_s, -1),))
        elif s == STATE_MID:
            trials.append((QpcEvent(float(next(mid_times)), -1),))
        else:
            trials.append(())
    noise_seed = int(noise_ss.generate_state(1)[0])
    samples = run_readout(trials, cfg, m.noise_rms_v, noise_seed)
    v = np.array([smp.v_out_v for smp in samples])
    return ExperimentResult(float(step_v), states.astype(np.int8), v, (0.0, m.peak1_v))


# -------------------------------------------------------------- histogram


@dataclass(frozen=True)
class HistogramResult:
    bin_edges_v: np.ndarray
    counts: np.ndarray
    peak0_v: float
    peak1_v: float

    @property
    def bin_width_v(self) -> float:
        return float(self.bin_edges_v[1] - self.bin_edges_v[0])

    @property
    def centers_v(self) -> np.ndarray:
        return 0.5 * (self.bin_edges_v[:-1] + self.bin_edges_v[1:])

    def bin_index(self, v: float) -> int:
        return int(round((v - self.centers_v[0]) / self.bin_width_v))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_lo_v", "bin_hi_v", "count"])
        for a, b, c in zip(self.bin_edges_v[:-1], self.bin_edges_v[1:], self.counts):
            w.writerow([f"{a:.6g}", f"{b:.6g}", int(c)])
        return buf.getvalue()


def _voltages(data) -> np.ndarray:
    if isinstance(data, ExperimentResult):
        return data.v_out_v
    return np.asarray(data, dtype=float)


def histogram(data, bin_width_v: float = 0.05, split_v: float | None = None) -> HistogramResult:
    """Bins centred on integer multiples of ``bin_width_v``.

    Peaks are the fullest bin on each side of ``split_v`` (default: halfway
    between the nominal peaks, or -150 mV for raw data).
    """
    if bin_width_v <= 0:
        raise ValueError("bin_width_v must be > 0")
    v = _voltages(data)
    if v.size == 0:
        raise ValueError("no samples")
    k = np.rint(v / bin_width_v).astype(int)
    k_lo, k_hi = int(k.min()), int(k.max())
    counts = np.bincount(k - k_lo, minlength=k_hi - k_lo + 1)
    centers = np.arange(k_lo, k_hi + 1) * bin_width_v
    edges = np.append(centers - bin_width_v / 2, centers[-1] + bin_width_v / 2)
    if split_v is None:
        split_v = sum(data.peaks_v) / 2 if isinstance(data, ExperimentResult) else -0.15
    upper = centers >= split_v
    peak0 = centers[upper][np.argmax(counts[upper])] if upper.any() else math.nan
    peak1 = centers[~upper][np.argmax(counts[~upper])] if (~upper).any() else math.nan
    return HistogramResult(edges, counts, float(peak0), float(peak1))


def extract_probabilities(
    data,
    bin_width_v: float = 0.05,
    peaks_v: tuple[float, float] | None = None,
    n_total: int | None = None,
    neighbours: int = 1,
    range_v: tuple[float, float] = (-0.5, 0.2),
) -> tuple[float, float, int]:
    """Three-bin probability read-out: ``(p0, p1, discarded)``.

    Counts in the bin holding each nominal peak plus ``neighbours`` bins on
    either side are divided by the full sample count; everything else is
    discarded but stays in the denominator.  ``range_v`` is the span of
    the read-out histogram; both peaks must fall inside it.
    """
    v = _voltages(data)
    if peaks_v is None:
        peaks_v = data.peaks_v if isinstance(data, ExperimentResult) else (0.0, -0.3)
    n_total = v.size if n_total is None else n_total
    if n_total < v.size:
        raise ValueError("n_total smaller than the number of samples")
    k = np.rint(v / bin_width_v).astype(int)
    k0, k1 = (int(round(p / bin_width_v)) for p in peaks_v)
    if abs(k0 - k1) <= 2 * neighbours:
        raise ValueError("peak windows overlap at this bin width")
    lo, hi = range_v
    if not all(lo <= p <= hi for p in peaks_v):
        raise ValueError(f"histogram range {lo:g}..{hi:g} V does not cover peaks {peaks_v}")
    c0 = int(np.count_nonzero(np.abs(k - k0) <= neighbours))
    c1 = int(np.count_nonzero(np.abs(k - k1) <= neighbours))
    return c0 / n_total, c1 / n_total, int(v.size - c0 - c1)


def probability_sweep(
    m: TunnelingModel, steps_v: Sequence[float], n: int = 10_000, seed: int = 0, bin_width_v: float = 0.05
) -> list[dict]:
    rows = []
    for i, s in enumerate(steps_v):
        res = run_trials(m, s, n, np.random.SeedSequence([seed, i]))
        p0, p1, disc = extract_probabilities(res, bin_width_v)
        rows.append({"step_v": float(s), "p0": p0, "p1": p1, "discarded": disc, "n": n})
    return rows


# -------------------------------------------------------------- bias scan


@dataclass(frozen=True)
class BiasScanConfig:
    v_rd_grid_v: tuple[float, ...]
    v_rg_grid_v: tuple[float, ...]
    trials_per_point: int = 2000
    resonance_window: tuple[float, float, float, float] = (0.3, 0.5, 0.9, 1.1)  # rd_lo, rd_hi, rg_lo, rg_hi
    step_v: float = 60e-3
    dip_alpha: float = 0.05
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "v_rd_grid_v", tuple(float(x) for x in self.v_rd_grid_v))
        object.__setattr__(self, "v_rg_grid_v", tuple(float(x) for x in self.v_rg_grid_v))
        if not self.v_rd_grid_v or not self.v_rg_grid_v:
            raise ValueError("bias grids must be non-empty")
        if self.trials_per_point < 4:
            raise ValueError("trials_per_point must be >= 4")
        rd_lo, rd_hi, rg_lo, rg_hi = self.resonance_window
        if rd_lo > rd_hi or rg_lo > rg_hi:
            raise ValueError("resonance window bounds out of order")

    def in_window(self, v_rd: float, v_rg: float) -> bool:
        rd_lo, rd_hi, rg_lo, rg_hi = self.resonance_window
        return rd_lo <= v_rd <= rd_hi and rg_lo <= v_rg <= rg_hi


@dataclass(frozen=True)
class BiasScanResult:
    v_rd_grid_v: tuple[float, ...]
    v_rg_grid_v: tuple[float, ...]
    mean_v: np.ndarray  # shape (len(rd), len(rg))
    dip_pvalue: np.ndarray
    bimodal: np.ndarray

    def rows(self) -> list[dict]:
        out = []
        for i, rd in enumerate(self.v_rd_grid_v):
            for j, rg in enumerate(self.v_rg_grid_v):
                out.append(
                    {
                        "v_rd_v": rd,
                        "v_rg_v": rg,
                        "mean_v": float(self.mean_v[i, j]),
                        "dip_pvalue": float(self.dip_pvalue[i, j]),
                        "bimodal": bool(self.bimodal[i, j]),
                    }
                )
        return out


def bias_scan(cfg: BiasScanConfig, m: TunnelingModel | None = None) -> BiasScanResult:
    """Mean detector output over a (V_RD, V_RG) grid with a dip-test flag.

    Inside the resonance window the dose-response applies; outside it no
    electron tunnels and there are no midzone events.  Each grid point gets
    its own RNG stream keyed by ``(seed, i, j)``.
    """
    import diptest

    m = m or TunnelingModel()
    quiet = TunnelingModel(**{**_model_kwargs(m), "midzone_rate": 0.0})
    shape = (len(cfg.v_rd_grid_v), len(cfg.v_rg_grid_v))
    mean = np.zeros(shape)
    pval = np.ones(shape)
    for i, rd in enumerate(cfg.v_rd_grid_v):
        for j, rg in enumerate(cfg.v_rg_grid_v):
            inside = cfg.in_window(rd, rg)
            res = run_trials(
                m if inside else quiet,
                cfg.step_v,
                cfg.trials_per_point,
                np.random.SeedSequence([cfg.seed, i, j]),
                p1=None if inside else 0.0,
            )
            mean[i, j] = res.v_out_v.mean()
            pval[i, j] = diptest.diptest(res.v_out_v)[1]
    return BiasScanResult(cfg.v_rd_grid_v, cfg.v_rg_grid_v, mean, pval, pval < cfg.dip_alpha)


def _model_kwargs(m: TunnelingModel) -> dict:
    return {f: getattr(m, f) for f in m.__dataclass_fields__}


# -------------------------------------------------------------- statistics


def autocorrelation(series, max_lag: int) -> np.ndarray:
    """Biased sample ACF for lags ``0..max_lag``."""
    x = np.asarray(series, dtype=float)
    if max_lag < 0 or x.size <= max_lag:
        raise ValueError("series must be longer than max_lag")
    d = x - x.mean()
    c0 = float(d @ d)
    if c0 == 0:
        raise ValueError("ACF undefined for a constant series")
    n = x.size
    return np.array([float(d[: n - k] @ d[k:]) / c0 for k in range(max_lag + 1)])


# ------------------------------------------------------------- dot physics


@dataclass(frozen=True)
class DotParameters:
    c_dot_f: float = 35e-18

    def __post_init__(self):
        if self.c_dot_f <= 0:
            raise ValueError("c_dot_f must be > 0")

    @property
    def delta_e_j(self) -> float:
        return constants.e**2 / self.c_dot_f

    @property
    def delta_e_ev(self) -> float:
        return self.delta_e_j / constants.e


def charging_energy(c_dot_f: float) -> tuple[float, float]:
    d = DotParameters(c_dot_f)
    return d.delta_e_j, d.delta_e_ev


def dot_capacitance(delta_e_ev: float) -> float:
    if delta_e_ev <= 0:
        raise ValueError("delta_e_ev must be > 0")
    return constants.e / delta_e_ev


def thermal_ratio(delta_e_ev: float, temp_k: float = 3.0) -> float:
    """Charging energy in units of kT."""
    if temp_k <= 0:
        raise ValueError("temp_k must be > 0")
    return delta_e_ev * constants.e / (constants.k * temp_k)


def divider_map(gate_swing_v, ratio: float = 0.1):
    if not 0 < ratio < 1:
        raise ValueError("ratio must be in (0, 1)")
    return np.multiply(gate_swing_v, ratio)


def summary_json(result: ExperimentResult, bin_width_v: float = 0.05) -> str:
    p0, p1, disc = extract_probabilities(result, bin_width_v)
    h = histogram(result, bin_width_v)
    return json.dumps(
        {
            "step_v": result.step_v,
            "n": len(result),
            "p0": p0,
            "p1": p1,
            "discarded": disc,
            "peak0_v": h.peak0_v,
            "peak1_v": h.peak1_v,
            "mean_v": float(result.v_out_v.mean()),
            "std_v": float(result.v_out_v.std()),
        },
        indent=2,
        sort_keys=True,
    )
