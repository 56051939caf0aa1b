"""Behavioural switched-capacitor models.

Covers the sigma-delta sequenced VDAC (charge redistribution between a charge
capacitor C1 and a storage capacitor C2, coarse and fine stages), the IDAC
reset-drain bias, the injector pedestal-plus-step waveform and hold droop.

Default capacitor values are assumptions: only the ~300 uV coarse resolution
near a 0.4 V target is known, so C1/(C1+C2) = 7.5e-4 with a 0.8 V reference.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, replace

import numpy as np

from .pulsegen import Edge, SignalTimeline

__all__ = [
    "BiasLimits",
    "BiasRangeError",
    "VdacPulse",
    "VdacStage",
    "SigmaDeltaSequencer",
    "RampResult",
    "vdac_pulse",
    "vdac_ramp",
    "LeakageModel",
    "load_leakage_csv",
    "apply_droop",
    "InjectorConfig",
    "injector_step_v",
    "injector_waveform",
    "code_for_step",
    "IdacReplica",
    "idac_current",
    "idac_vrdpre",
]


class BiasRangeError(ValueError):
    pass


@dataclass(frozen=True)
class BiasLimits:
    v_th_v: float = 0.3
    v_dsat_v: float = 0.1
    v_supply_v: float = 0.8
    v_neg_supply_v: float = -1.0

    def __post_init__(self):
        if not self.v_min_v < self.v_max_v:
            raise ValueError("bias limits are empty")

    @property
    def v_max_v(self) -> float:
        return self.v_supply_v - self.v_th_v

    @property
    def v_min_v(self) -> float:
        return self.v_neg_supply_v + self.v_dsat_v

    def check(self, v: float, what: str = "bias level") -> float:
        if not self.v_min_v <= v <= self.v_max_v:
            raise BiasRangeError(f"{what} {v:.6g} V outside [{self.v_min_v:.6g}, {self.v_max_v:.6g}] V")
        return v


# ------------------------------------------------------------------- VDAC


class VdacPulse(enum.Enum):
    DC = "DC"  # discharge C1
    CH = "CH"  # charge C1 to vref
    SC = "SC"  # share charge between C1 and C2


@dataclass(frozen=True)
class VdacStage:
    c1_f: float = 0.75e-15
    c2_f: float = 999.25e-15
    v1_v: float = 0.0
    v2_v: float = 0.0
    vref_v: float = 0.8

    def __post_init__(self):
        if self.c1_f <= 0 or self.c2_f <= 0:
            raise ValueError("capacitances must be > 0")

    @property
    def share_ratio(self) -> float:
        return self.c1_f / (self.c1_f + self.c2_f)

    @property
    def charge_c(self) -> float:
        return self.c1_f * self.v1_v + self.c2_f * self.v2_v

    def step_up_v(self) -> float:
        """Output increment of one CH+SC pair from the current state."""
        return (self.vref_v - self.v2_v) * self.share_ratio

    def step_down_v(self) -> float:
        return self.v2_v * self.share_ratio


def vdac_pulse(stage: VdacStage, pulse: VdacPulse | str) -> VdacStage:
    pulse = VdacPulse(pulse)
    if pulse is VdacPulse.DC:
        return replace(stage, v1_v=0.0)
    if pulse is VdacPulse.CH:
        return replace(stage, v1_v=stage.vref_v)
    v = (stage.c1_f * stage.v1_v + stage.c2_f * stage.v2_v) / (stage.c1_f + stage.c2_f)
    return replace(stage, v1_v=v, v2_v=v)


@dataclass(frozen=True)
class SigmaDeltaSequencer:
    input_code: int = 128
    clk_hz: float = 125e6
    pulse_width_s: float = 8e-9

    def __post_init__(self):
        if not 0 <= self.input_code <= 255:
            raise ValueError("input_code is 8-bit")
        if self.pulse_width_s > 1.0 / self.clk_hz * (1 + 1e-12):
            raise ValueError("pulse width exceeds the clock period")

    @property
    def period_s(self) -> float:
        return 1.0 / self.clk_hz

    def target_v(self, vref_v: float) -> float:
        """Output level requested by ``input_code`` as a fraction of vref."""
        return self.input_code / 256 * vref_v


@dataclass
class RampResult:
    time_s: np.ndarray
    v_out_v: np.ndarray
    pulses: list[tuple[str, str]]  # (stage, pulse name) in issue order
    coarse: VdacStage
    fine: VdacStage
    coarse_pairs: int
    fine_pairs: int

    @property
    def settle_time_s(self) -> float:
        return float(self.time_s[-1]) if len(self.time_s) else 0.0

    @property
    def final_v(self) -> float:
        return self.fine.v2_v


def _step_toward(stage: VdacStage, target: float, label: str, pulses: list) -> tuple[VdacStage, bool]:
    """One CH/DC+SC pair toward ``target``; False once the next pair would not help."""
    err = target - stage.v2_v
    if err > 0:
        if stage.step_up_v() >= 2 * err:
            return stage, False
        first = VdacPulse.CH
    elif err < 0:
        if stage.step_down_v() >= -2 * err:
            return stage, False
        first = VdacPulse.DC
    else:
        return stage, False
    stage = vdac_pulse(stage, first)
    stage = vdac_pulse(stage, VdacPulse.SC)
    pulses.append((label, first.value))
    pulses.append((label, "SC"))
    return stage, True


def vdac_ramp(
    coarse: VdacStage,
    fine: VdacStage,
    seq: SigmaDeltaSequencer,
    target_v: float,
    limits: BiasLimits | None = None,
    max_pairs: int = 1_000_000,
) -> RampResult:
    """Ramp a two-stage VDAC to ``target_v`` and freeze it.

    The coarse stage steps until a further pair would overshoot by more than
    it corrects; its output is then handed to the fine stage, which trims
    with its smaller share ratio.  Each pulse occupies one sequencer clock.
    The trajectory holds one point per completed CH/DC+SC pair.
    """
    limits = limits or BiasLimits()
    limits.check(target_v, "VDAC target")
    if not min(0.0, coarse.vref_v) <= target_v <= max(0.0, coarse.vref_v):
        raise BiasRangeError(f"target {target_v} V not reachable from vref {coarse.vref_v} V")
    pulses: list[tuple[str, str]] = []
    times, volts = [], []
    t = 0.0
    pairs = {"coarse": 0, "fine": 0}

    stage = coarse
    for _ in range(max_pairs):
        stage, moved = _step_toward(stage, target_v, "coarse", pulses)
        if not moved:
            break
        pairs["coarse"] += 1
        t = 2 * pairs["coarse"] * seq.period_s
        times.append(t)
        volts.append(stage.v2_v)
    coarse = stage

    stage = replace(fine, v2_v=coarse.v2_v, v1_v=coarse.v2_v)
    base = 2 * pairs["coarse"]
    for _ in range(max_pairs):
        stage, moved = _step_toward(stage, target_v, "fine", pulses)
        if not moved:
            break
        pairs["fine"] += 1
        t = (base + 2 * pairs["fine"]) * seq.period_s
        times.append(t)
        volts.append(stage.v2_v)
    fine = stage
    return RampResult(np.array(times), np.array(volts), pulses, coarse, fine, pairs["coarse"], pairs["fine"])


# ---------------------------------------------------------------- leakage


@dataclass(frozen=True)
class LeakageModel:
    droop_rate_v_per_s: float = 5e-3 / 600e-6
    reference_temp_k: float = 3.0
    temperature_k: tuple[float, ...] = ()
    leakage_a: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.temperature_k) != len(self.leakage_a):
            raise ValueError("temperature and leakage columns differ in length")
        if self.temperature_k:
            t = np.asarray(self.temperature_k)
            i = np.asarray(self.leakage_a)
            if np.any(np.diff(t) <= 0):
                raise ValueError("temperatures must be strictly increasing")
            if np.any(np.diff(i) < 0):
                raise ValueError("leakage must not increase as temperature decreases")

    def rate_at(self, temp_k: float | None = None) -> float:
        """Droop rate scaled by the leakage ratio I(T)/I(T_ref)."""
        if temp_k is None or not self.temperature_k:
            return self.droop_rate_v_per_s
        i_t = np.interp(temp_k, self.temperature_k, self.leakage_a)
        i_ref = np.interp(self.reference_temp_k, self.temperature_k, self.leakage_a)
        return self.droop_rate_v_per_s * float(i_t / i_ref)


def load_leakage_csv(path, droop_rate_v_per_s: float = 5e-3 / 600e-6, reference_temp_k: float = 3.0) -> LeakageModel:
    """Read a (T_K, I_A) table; a header row is skipped."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except ValueError:
                continue  # header
    rows.sort()
    return LeakageModel(droop_rate_v_per_s, reference_temp_k, tuple(r[0] for r in rows), tuple(r[1] for r in rows))


def apply_droop(v_v: float, hold_time_s: float, lm: LeakageModel | None = None, temp_k: float | None = None) -> float:
    if hold_time_s < 0:
        raise ValueError("hold_time_s must be >= 0")
    lm = lm or LeakageModel()
    return v_v - lm.rate_at(temp_k) * hold_time_s


# --------------------------------------------------------------- injector


@dataclass(frozen=True)
class InjectorConfig:
    cu1_f: float = 1e-15
    cu3_f: float = 3e-15
    v_bias_v: float = 0.2
    code: int = 0
    vref_v: float = 0.8

    def __post_init__(self):
        if self.cu1_f <= 0 or self.cu3_f <= 0:
            raise ValueError("capacitances must be > 0")
        if not 0 <= self.code <= 255:
            raise ValueError("code is 8-bit")

    @property
    def c_div(self) -> float:
        return self.cu1_f / (self.cu1_f + self.cu3_f)

    @property
    def lsb_v(self) -> float:
        return self.vref_v * self.c_div / 256


def injector_step_v(cfg: InjectorConfig, code: int | None = None) -> float:
    """Step height ΔV = code/256 * vref * c_div."""
    code = cfg.code if code is None else code
    if not 0 <= code <= 255:
        raise ValueError("code is 8-bit")
    return code / 256 * cfg.vref_v * cfg.c_div


def code_for_step(step_v: float, cfg: InjectorConfig | None = None) -> int:
    """Nearest code whose step is ``step_v``."""
    cfg = cfg or InjectorConfig()
    code = round(step_v / cfg.lsb_v)
    if not 0 <= code <= 255:
        raise ValueError(f"step {step_v} V outside the CDAC range")
    return code


def injector_waveform(
    cfg: InjectorConfig,
    precharge_done_at_s: float,
    step_at_s: float,
    limits: BiasLimits | None = None,
    signal: str = "injector",
) -> SignalTimeline:
    """Pedestal at ``v_bias_v`` after pre-charge, then the digital step.

    The output RC filter is treated as ideal.  Levels are volts.
    """
    if step_at_s < precharge_done_at_s:
        raise ValueError("step must follow the end of pre-charge")
    limits = limits or BiasLimits()
    pedestal = limits.check(cfg.v_bias_v, "pedestal")
    top = limits.check(pedestal + injector_step_v(cfg), "injector step level")
    edges = [Edge(0.0, signal, 0.0), Edge(precharge_done_at_s, signal, pedestal)]
    if cfg.code:
        edges.append(Edge(step_at_s, signal, top))
    return SignalTimeline(tuple(edges), resolution_s=0.0)


# ------------------------------------------------------------------- IDAC


@dataclass(frozen=True)
class IdacReplica:
    """Replica-biased V_RDPRE generator.

    V_RDPRE = v_ss + v_gs + r_eff * I(code) with I spaced logarithmically
    between ``i_min_a`` (code 0) and ``i_max_a`` (code 255).
    """

    v_ss_v: float = -1.0
    v_gs_v: float = 0.45
    r_eff_ohm: float = 500e3
    i_min_a: float = 1e-9
    i_max_a: float = 1e-6
    mapping: str = "log"  # or "linear"


def idac_current(code: int, replica: IdacReplica | None = None) -> float:
    r = replica or IdacReplica()
    if not 0 <= code <= 255:
        raise ValueError("code is 8-bit")
    x = code / 255
    if r.mapping == "linear":
        return r.i_min_a + (r.i_max_a - r.i_min_a) * x
    return r.i_min_a * (r.i_max_a / r.i_min_a) ** x


def idac_vrdpre(code: int, replica: IdacReplica | None = None) -> float:
    r = replica or IdacReplica()
    return r.v_ss_v + r.v_gs_v + r.r_eff_ohm * idac_current(code, r)
