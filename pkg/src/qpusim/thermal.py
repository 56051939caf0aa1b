"""Cryostat heat-load calculator for the 3 K stage.

Passive conduction down the flex cable uses the tabulated copper
conductivity integrated between the stage temperatures; the clock coax is a
lumped W/K figure times the stage temperature difference.  Active load is
I^2 R in the supply wires, RF load is the delivered clock power plus the
cable loss.  Radiation is not modelled.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from importlib.resources import files
from typing import Sequence

import numpy as np

__all__ = [
    "ConductivityTable",
    "nist_copper_k",
    "copper_table",
    "load_conductivity_csv",
    "default_copper_table",
    "FlexCableSpec",
    "CoaxSpec",
    "ActiveLoadSpec",
    "WiringPlan",
    "ScalingRule",
    "ThermalScenario",
    "ThermalReport",
    "conductivity_integral",
    "passive_flex_load",
    "coax_load",
    "active_load",
    "total_load",
    "scenario_load",
    "scaled_wiring",
    "scaling_study",
    "report_rows",
]

# NIST cryogenic material properties, OFHC copper:
# log10 k = (a + c T^.5 + e T + g T^1.5 + i T^2) / (1 + b T^.5 + d T + f T^1.5 + h T^2)
_NIST_CU = {
    50: (1.8743, -0.41538, -0.6018, 0.13294, 0.26426, -0.0219, -0.051276, 0.0014871, 0.003723),
    100: (2.2154, -0.47461, -0.88068, 0.13871, 0.29505, -0.02043, -0.04831, 0.001281, 0.003207),
    150: (2.3797, -0.4918, -0.98615, 0.13942, 0.30475, -0.019713, -0.046897, 0.0011969, 0.0029988),
}


def nist_copper_k(temp_k, rrr: int = 50):
    """Thermal conductivity of OFHC copper in W/(m K), valid 4-300 K."""
    a, b, c, d, e, f, g, h, i = _NIST_CU[rrr]
    t = np.asarray(temp_k, dtype=float)
    r = np.sqrt(t)
    num = a + c * r + e * t + g * t * r + i * t**2
    den = 1 + b * r + d * t + f * t * r + h * t**2
    return 10.0 ** (num / den)


@dataclass(frozen=True)
class ConductivityTable:
    temp_k: tuple[float, ...]
    k_w_per_mk: tuple[float, ...]
    source: str = ""

    def __post_init__(self):
        t = np.asarray(self.temp_k, dtype=float)
        k = np.asarray(self.k_w_per_mk, dtype=float)
        if t.shape != k.shape or t.size < 2:
            raise ValueError("need at least two (T, k) rows")
        if np.any(np.diff(t) <= 0):
            raise ValueError("temperatures must be strictly increasing")
        if np.any(k <= 0):
            raise ValueError("conductivity must be > 0")

    @classmethod
    def constant(cls, k0: float, t_lo: float = 1.0, t_hi: float = 300.0, n: int = 2) -> "ConductivityTable":
        t = np.linspace(t_lo, t_hi, n)
        return cls(tuple(t), (k0,) * n, f"constant {k0}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["T_K", "k_W_per_mK"])
        for t, k in zip(self.temp_k, self.k_w_per_mk):
            w.writerow([f"{t:g}", f"{k:.6g}"])
        return buf.getvalue()


def copper_table(rrr: int = 50, temps_k: Sequence[float] | None = None) -> ConductivityTable:
    if temps_k is None:
        temps_k = np.concatenate([np.arange(1.0, 100.0, 0.5), np.arange(100.0, 301.0, 5.0)])
    t = np.asarray(temps_k, dtype=float)
    k = nist_copper_k(t, rrr)
    return ConductivityTable(tuple(float(x) for x in t), tuple(float(f"{x:.6g}") for x in k), f"NIST OFHC copper RRR={rrr}")


def load_conductivity_csv(path_or_text, source: str | None = None) -> ConductivityTable:
    """Read ``T_K,k_W_per_mK`` rows (header and ``#`` lines skipped)."""
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        text = path_or_text
        source = source or "inline"
    else:
        with open(path_or_text) as fh:
            text = fh.read()
        source = source or str(path_or_text)
    rows = []
    for rec in csv.reader(io.StringIO(text)):
        if not rec or rec[0].lstrip().startswith("#"):
            continue
        try:
            rows.append((float(rec[0]), float(rec[1])))
        except ValueError:
            continue
    rows.sort()
    return ConductivityTable(tuple(r[0] for r in rows), tuple(r[1] for r in rows), source)


def default_copper_table() -> ConductivityTable:
    text = files("qpusim.data").joinpath("copper_ofhc_rrr50.csv").read_text()
    return load_conductivity_csv(text, "NIST OFHC copper RRR=50")


def conductivity_integral(table: ConductivityTable, t_cold_k: float, t_hot_k: float) -> float:
    """Trapezoidal area under k(T) between the two temperatures, W/m."""
    t = np.asarray(table.temp_k)
    k = np.asarray(table.k_w_per_mk)
    if t_cold_k < t[0] or t_hot_k > t[-1]:
        raise ValueError(f"table covers {t[0]}-{t[-1]} K, need {t_cold_k}-{t_hot_k} K")
    inside = (t > t_cold_k) & (t < t_hot_k)
    tt = np.concatenate([[t_cold_k], t[inside], [t_hot_k]])
    kk = np.interp(tt, t, k)
    return float(np.trapezoid(kk, tt))


@dataclass(frozen=True)
class FlexCableSpec:
    n_wires: int = 35
    area_m2: float = 50e-6 * 18e-6
    length_m: float = 0.3
    t_cold_k: float = 3.0
    t_hot_k: float = 60.0

    def __post_init__(self):
        if self.n_wires < 0 or self.area_m2 <= 0 or self.length_m <= 0:
            raise ValueError("flex geometry must be positive")
        if not self.t_cold_k < self.t_hot_k:
            raise ValueError("t_cold_k must be below t_hot_k")


@dataclass(frozen=True)
class CoaxSpec:
    rho_c_w_per_k: float = 1.4e-4
    delta_t_k: float = 57.0
    cable_loss_db: float = 2.0
    delivered_power_w: float = 1e-4  # -10 dBm into the chip
    termination_ohm: float = 50.0

    def __post_init__(self):
        if self.cable_loss_db < 0:
            raise ValueError("cable loss must be >= 0")


@dataclass(frozen=True)
class ActiveLoadSpec:
    supply_currents_a: tuple[float, ...] = (22.2e-3,) * 4
    resistivity_ohm_m: float = 1.0e-8

    def __post_init__(self):
        object.__setattr__(self, "supply_currents_a", tuple(self.supply_currents_a))
        if any(i < 0 for i in self.supply_currents_a):
            raise ValueError("supply currents must be >= 0")

    def wire_resistance_ohm(self, flex: FlexCableSpec) -> float:
        return self.resistivity_ohm_m * flex.length_m / flex.area_m2


def passive_flex_load(spec: FlexCableSpec, table: ConductivityTable) -> float:
    return spec.n_wires * spec.area_m2 / spec.length_m * conductivity_integral(table, spec.t_cold_k, spec.t_hot_k)


def coax_load(spec: CoaxSpec) -> dict[str, float]:
    """Passive conduction plus RF dissipation (cable loss + termination)."""
    passive = spec.rho_c_w_per_k * spec.delta_t_k
    rf = spec.delivered_power_w * 10 ** (spec.cable_loss_db / 10)
    return {"passive_w": passive, "rf_w": rf, "total_w": passive + rf}


def active_load(active: ActiveLoadSpec, flex: FlexCableSpec) -> float:
    r = active.wire_resistance_ohm(flex)
    return float(sum(i * i * r for i in active.supply_currents_a))


@dataclass(frozen=True)
class ThermalReport:
    flex_passive_w: float
    coax_passive_w: float
    active_w: float
    rf_w: float
    budget_w: float = 1.5
    extra: dict = field(default_factory=dict)

    @property
    def items(self) -> dict[str, float]:
        return {
            "flex_passive_w": self.flex_passive_w,
            "coax_passive_w": self.coax_passive_w,
            "active_w": self.active_w,
            "rf_w": self.rf_w,
        }

    @property
    def total_w(self) -> float:
        return sum(self.items.values())

    @property
    def budget_fraction(self) -> float:
        return self.total_w / self.budget_w

    def to_dict(self) -> dict:
        d = dict(self.items)
        d.update(total_w=self.total_w, budget_w=self.budget_w, budget_fraction=self.budget_fraction)
        d.update(self.extra)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def total_load(
    flex: FlexCableSpec,
    coax: CoaxSpec,
    active: ActiveLoadSpec,
    table: ConductivityTable,
    budget_w: float = 1.5,
) -> ThermalReport:
    c = coax_load(coax)
    return ThermalReport(
        flex_passive_w=passive_flex_load(flex, table),
        coax_passive_w=c["passive_w"],
        active_w=active_load(active, flex),
        rf_w=c["rf_w"],
        budget_w=budget_w,
    )


# ---------------------------------------------------------------- scaling


@dataclass(frozen=True)
class WiringPlan:
    """Flex wire groups.  Signal wires exclude the grounds."""

    n_control: int = 10
    n_supply: int = 4
    n_detectors: int = 8
    analog_wires_per_detector: int = 2
    n_ground: int = 5
    on_chip_adc: bool = False

    @property
    def n_analog(self) -> int:
        return 0 if self.on_chip_adc else self.n_detectors * self.analog_wires_per_detector

    @property
    def signal_wires(self) -> int:
        return self.n_control + self.n_supply + self.n_analog

    @property
    def flex_wires(self) -> int:
        return self.signal_wires + self.n_ground


@dataclass(frozen=True)
class ScalingRule:
    """How the wiring grows with qubit count.

    Detectors follow ``n_det * m**detector_exponent``; the default exponent
    puts 8 detectors at 1x and 160 at 10x.  Supply and ground wires grow
    linearly (constant current per wire), control wires stay fixed.
    """

    detector_exponent: float = math.log10(20.0)
    supply_scales: bool = True
    ground_scales: bool = True


@dataclass(frozen=True)
class ThermalScenario:
    wiring: WiringPlan = field(default_factory=WiringPlan)
    flex: FlexCableSpec = field(default_factory=FlexCableSpec)
    coax: CoaxSpec = field(default_factory=CoaxSpec)
    supply_current_per_wire_a: float = 22.2e-3
    resistivity_ohm_m: float = 1.0e-8
    budget_w: float = 1.5
    scaling: ScalingRule = field(default_factory=ScalingRule)
    conductivity_csv: str | None = None  # None: bundled copper table


def scenario_load(sc: ThermalScenario, table: ConductivityTable | None = None) -> ThermalReport:
    table = table or (load_conductivity_csv(sc.conductivity_csv) if sc.conductivity_csv else default_copper_table())
    flex = replace(sc.flex, n_wires=sc.wiring.flex_wires)
    active = ActiveLoadSpec((sc.supply_current_per_wire_a,) * sc.wiring.n_supply, sc.resistivity_ohm_m)
    rep = total_load(flex, sc.coax, active, table, sc.budget_w)
    extra = {
        "flex_wires": sc.wiring.flex_wires,
        "signal_wires": sc.wiring.signal_wires,
        "detectors": sc.wiring.n_detectors,
        "wire_resistance_ohm": active.wire_resistance_ohm(flex),
    }
    return replace(rep, extra=extra)


def scaled_wiring(base: WiringPlan, rule: ScalingRule, multiplier: float, on_chip_adc: bool | None = None) -> WiringPlan:
    if multiplier < 1:
        raise ValueError("multiplier must be >= 1")
    return replace(
        base,
        n_detectors=round(base.n_detectors * multiplier**rule.detector_exponent),
        n_supply=round(base.n_supply * multiplier) if rule.supply_scales else base.n_supply,
        n_ground=round(base.n_ground * multiplier) if rule.ground_scales else base.n_ground,
        on_chip_adc=base.on_chip_adc if on_chip_adc is None else on_chip_adc,
    )


def scaling_study(
    base: ThermalScenario,
    multipliers: float | Sequence[float] = 10.0,
    on_chip_adc: bool | None = None,
    table: ConductivityTable | None = None,
) -> list[tuple[float, ThermalReport]]:
    if np.isscalar(multipliers):
        multipliers = [multipliers]
    out = []
    for m in multipliers:
        wiring = scaled_wiring(base.wiring, base.scaling, float(m), on_chip_adc)
        rep = scenario_load(replace(base, wiring=wiring), table)
        rep.extra["multiplier"] = float(m)
        out.append((float(m), rep))
    return out


def report_rows(reports: Sequence[tuple[float, ThermalReport]]) -> list[dict]:
    return [r.to_dict() for _, r in reports]
