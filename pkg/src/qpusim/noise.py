"""Closed-form sampled-data noise engine.

Power transfer functions for track-and-hold aliasing and correlated double
sampling, RC responses, kT/C terms and PSD integration, plus the injector and
detector output-noise budgets built from them.

All densities are one-sided, in V^2/Hz.  Transfer functions are power
(magnitude-squared) responses and are dimensionless.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.constants import k as K_B

__all__ = [
    "FrequencyGrid",
    "NoisePSD",
    "SamplerTiming",
    "CdsTiming",
    "h_sh",
    "h_cds",
    "h_cds_alias_sum",
    "rc_power_response",
    "ktc_rms",
    "integrate_rms",
    "BudgetRow",
    "NoiseBudget",
    "InjectorNoiseParams",
    "DetectorNoiseParams",
    "injector_noise_budget",
    "detector_noise_budget",
]


@dataclass(frozen=True)
class FrequencyGrid:
    points_hz: np.ndarray
    scheme: str = "logarithmic"

    def __post_init__(self):
        pts = np.asarray(self.points_hz, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("frequency grid is empty")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        if pts[0] < 0:
            raise ValueError("frequency grid must be non-negative")
        object.__setattr__(self, "points_hz", pts)

    @classmethod
    def logarithmic(cls, f_min_hz: float, f_max_hz: float, n: int = 10_000) -> "FrequencyGrid":
        return cls(np.geomspace(f_min_hz, f_max_hz, n), "logarithmic")

    @classmethod
    def linear(cls, f_min_hz: float, f_max_hz: float, n: int = 10_000) -> "FrequencyGrid":
        return cls(np.linspace(f_min_hz, f_max_hz, n), "linear")

    def refined(self, factor: int = 2) -> "FrequencyGrid":
        """Same span and scheme with ``factor`` times the point density."""
        n = (len(self.points_hz) - 1) * factor + 1
        lo, hi = self.points_hz[0], self.points_hz[-1]
        if self.scheme == "logarithmic":
            return FrequencyGrid.logarithmic(lo, hi, n)
        return FrequencyGrid.linear(lo, hi, n)


@dataclass(frozen=True)
class NoisePSD:
    density: Callable[[np.ndarray], np.ndarray]
    label: str = ""
    white_level: float | None = None

    @classmethod
    def white(cls, level_v2_per_hz: float, label: str = "") -> "NoisePSD":
        if level_v2_per_hz < 0:
            raise ValueError("PSD level must be >= 0")
        return cls(lambda f: np.full(np.shape(f), level_v2_per_hz, dtype=float), label, level_v2_per_hz)

    @classmethod
    def flicker(cls, white_v2_per_hz: float, corner_hz: float, label: str = "") -> "NoisePSD":
        """White floor plus 1/f rising below ``corner_hz``."""
        return cls(lambda f: white_v2_per_hz * (1.0 + corner_hz / np.asarray(f, dtype=float)), label)

    def __call__(self, f_hz):
        return self.density(np.asarray(f_hz, dtype=float))


@dataclass(frozen=True)
class SamplerTiming:
    """Track-and-hold timing; ``tau_track_s`` is tau_PC or tau_clk."""

    tau_track_s: float
    tau_p_s: float
    bw_n_hz: float = 500e6

    def __post_init__(self):
        if self.tau_p_s <= 0:
            raise ValueError("tau_p_s must be > 0")
        if not 0 <= self.tau_track_s <= self.tau_p_s:
            raise ValueError("need 0 <= tau_track_s <= tau_p_s")

    @property
    def tau_n(self) -> float:
        return self.tau_track_s / self.tau_p_s

    @property
    def tau_shn(self) -> float:
        """Normalized hold fraction."""
        return 1.0 - self.tau_n

    @property
    def f_s(self) -> float:
        return 1.0 / self.tau_p_s


@dataclass(frozen=True)
class CdsTiming:
    """CDS sampling timing.

    ``aperture_s`` sets the width of the sinc^2 hold factor; None means the
    S0/S1 sampling window ``tau_sh_s``.
    """

    tau_sh_s: float = 80e-9
    lambda_s: float = 100e-9
    period_s: float = 1e-6
    aperture_s: float | None = None

    def __post_init__(self):
        if not 0 < self.tau_sh_s < self.lambda_s < self.period_s:
            raise ValueError("need 0 < tau_sh_s < lambda_s < period_s")

    @property
    def f_s(self) -> float:
        return 1.0 / self.period_s

    @property
    def hold_aperture_s(self) -> float:
        return self.tau_sh_s if self.aperture_s is None else self.aperture_s


def h_sh(f_hz, t: SamplerTiming):
    """Track-and-hold aliasing power transfer.

    2 tau^2 (BW/f_s) sinc^2(tau f / f_s) + (1 - tau), tau the normalized hold.
    """
    f = np.asarray(f_hz, dtype=float)
    tau = t.tau_shn
    alias = 2.0 * tau**2 * (t.bw_n_hz / t.f_s) * np.sinc(tau * f / t.f_s) ** 2
    return alias + (1.0 - tau)


def h_cds(f_hz, t: CdsTiming, bw_n_hz: float = 100e6):
    """Simplified CDS power transfer.

    The alias sum over white input is replaced by the sideband count 2 BW/f_s.
    Exactly zero at DC.
    """
    f = np.asarray(f_hz, dtype=float)
    hold = np.sinc(f * t.hold_aperture_s) ** 2
    sidebands = 2.0 * bw_n_hz / t.f_s
    diff = np.sin(np.pi * t.lambda_s * f) ** 2
    return 4.0 * hold * sidebands * diff


def h_cds_alias_sum(f_hz, t: CdsTiming, bw_n_hz: float = 100e6, n_max: int = 1000):
    """Reference form of :func:`h_cds` with an explicit truncated alias sum.

    Sums the white input spectrum (unit level inside +-BW) over the images
    f - n/T for |n| <= n_max instead of using the closed-form count.
    """
    f = np.atleast_1d(np.asarray(f_hz, dtype=float))
    out = np.empty_like(f)
    n = np.arange(-n_max, n_max + 1)
    for i, fi in enumerate(f):
        images = fi - n / t.period_s
        count = np.count_nonzero(np.abs(images) <= bw_n_hz)
        x = math.pi * fi * t.hold_aperture_s
        hold = 1.0 if x == 0 else (math.sin(x) / x) ** 2
        out[i] = 4.0 * hold * count * math.sin(math.pi * t.lambda_s * fi) ** 2
    return out if np.ndim(f_hz) else float(out[0])


def rc_power_response(f_hz, pole_hz: float):
    if pole_hz <= 0:
        raise ValueError("pole_hz must be > 0")
    f = np.asarray(f_hz, dtype=float)
    return 1.0 / (1.0 + (f / pole_hz) ** 2)


def ktc_rms(temp_k: float, cap_f: float) -> float:
    """rms kT/C noise voltage in volts."""
    if temp_k <= 0 or cap_f <= 0:
        raise ValueError("temperature and capacitance must be > 0")
    return math.sqrt(K_B * temp_k / cap_f)


def _composite(psd: NoisePSD, chain: Iterable, f: np.ndarray) -> np.ndarray:
    out = np.asarray(psd(f), dtype=float).copy()
    for h in chain:
        out = out * (h(f) if callable(h) else float(h))
    return out


def integrate_rms(psd: NoisePSD, chain: Sequence, grid: FrequencyGrid) -> float:
    """rms of ``psd`` shaped by every power transfer in ``chain``.

    Items of ``chain`` are callables of frequency or constant power gains.
    Trapezoidal rule on the grid points.
    """
    f = grid.points_hz
    if f.size < 2:
        raise ValueError("need at least two grid points")
    return math.sqrt(float(np.trapezoid(_composite(psd, chain, f), f)))


# ---------------------------------------------------------------- budgets


@dataclass(frozen=True)
class BudgetRow:
    source: str
    rms_v: float
    kind: str = "spectral"  # or "ktc"


@dataclass
class NoiseBudget:
    rows: list[BudgetRow]
    total_rms_v: float
    label: str = ""
    spectra: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def row(self, source: str) -> BudgetRow:
        for r in self.rows:
            if r.source == source:
                return r
        raise KeyError(source)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "rows": [asdict(r) for r in self.rows],
            "total_rms_v": self.total_rms_v,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def spectra_rows(self):
        """Yield (f_hz, source, psd_out) rows for CSV export."""
        f = self.spectra.get("f_hz")
        if f is None:
            return
        for name, s in self.spectra.items():
            if name == "f_hz":
                continue
            for fi, si in zip(f, s):
                yield float(fi), name, float(si)


def _rss(rows: Sequence[BudgetRow]) -> float:
    return math.sqrt(sum(r.rms_v**2 for r in rows))


@dataclass(frozen=True)
class InjectorNoiseParams:
    """Injector output noise model inputs.

    Supply noise reaches the output through the CDAC switched-capacitor path
    (aliased with zero track time, then attenuated by ``c_div``); VDAC noise
    through the pre-charge switch (aliased with ``tau_pc_s`` tracking).
    """

    s_vdac_v2_per_hz: float
    s_vdd_v2_per_hz: float
    tau_p_s: float = 500e-9
    tau_pc_s: float = 100e-9
    tau_clk_s: float = 0.0
    bw_n_hz: float = 500e6
    rc_pc_pole_hz: float = 100e6
    rc_cdac_pole_hz: float = 100e6
    c_div: float = 0.25
    c_pc_f: float = 200e-15
    c_cdac_f: float = 500e-15
    temp_k: float = 3.0
    f_min_hz: float = 1e3
    n_points: int = 10_000


def injector_noise_budget(p: InjectorNoiseParams, grid: FrequencyGrid | None = None) -> NoiseBudget:
    if grid is None:
        grid = FrequencyGrid.logarithmic(p.f_min_hz, p.bw_n_hz, p.n_points)
    pc = SamplerTiming(p.tau_pc_s, p.tau_p_s, p.bw_n_hz)
    cdac = SamplerTiming(p.tau_clk_s, p.tau_p_s, p.bw_n_hz)
    chains = {
        "vdac_precharge": (
            NoisePSD.white(p.s_vdac_v2_per_hz, "S_VDAC"),
            [lambda f: h_sh(f, pc), lambda f: rc_power_response(f, p.rc_pc_pole_hz)],
        ),
        "vdd_cdac": (
            NoisePSD.white(p.s_vdd_v2_per_hz, "S_VDD"),
            [lambda f: h_sh(f, cdac), lambda f: rc_power_response(f, p.rc_cdac_pole_hz), p.c_div**2],
        ),
    }
    rows = [BudgetRow(name, integrate_rms(psd, chain, grid)) for name, (psd, chain) in chains.items()]
    rows.append(BudgetRow("ktc_precharge", ktc_rms(p.temp_k, p.c_pc_f), "ktc"))
    rows.append(BudgetRow("ktc_cdac", ktc_rms(p.temp_k, p.c_cdac_f), "ktc"))
    f = grid.points_hz
    spectra = {"f_hz": f}
    spectra.update({name: _composite(psd, chain, f) for name, (psd, chain) in chains.items()})
    return NoiseBudget(rows, _rss(rows), "injector", spectra)


@dataclass(frozen=True)
class DetectorNoiseParams:
    """Detector chain noise model inputs.

    Source densities are input-referred to their own stage: source follower
    at the QPC node, pre-amplifier at its input, output buffer at its input,
    interface at its input.  Sources ahead of the CDS are RC-filtered and
    aliased by the CDS transfer; the rest pass as white noise over ``bw_n_hz``.
    """

    s_sf_v2_per_hz: float
    s_pre_v2_per_hz: float
    s_obuf_v2_per_hz: float
    s_int_v2_per_hz: float
    gain_sf: float = 0.9
    gain_pre: float = 2.2
    gain_obuf: float = 5.4
    gain_interface: float = 2.0
    rc_pole_hz: float = 70e6
    cds: CdsTiming = field(default_factory=CdsTiming)
    bw_n_hz: float = 100e6
    c_sx_f: float = 200e-15
    temp_k: float = 3.0
    f_min_hz: float = 1e3
    n_points: int = 10_000


def detector_noise_budget(p: DetectorNoiseParams, grid: FrequencyGrid | None = None) -> NoiseBudget:
    if grid is None:
        grid = FrequencyGrid.logarithmic(p.f_min_hz, p.bw_n_hz, p.n_points)
    post = (p.gain_obuf * p.gain_interface) ** 2

    def rc(f):
        return rc_power_response(f, p.rc_pole_hz)

    def cds(f):
        return h_cds(f, p.cds, p.bw_n_hz)

    chains = {
        "source_follower": (
            NoisePSD.white(p.s_sf_v2_per_hz, "S_SF"),
            [(p.gain_sf * p.gain_pre) ** 2, rc, cds, post],
        ),
        "preamp": (NoisePSD.white(p.s_pre_v2_per_hz, "S_PRE"), [p.gain_pre**2, rc, cds, post]),
        "output_buffer": (NoisePSD.white(p.s_obuf_v2_per_hz, "S_OBUF"), [post]),
        "interface": (NoisePSD.white(p.s_int_v2_per_hz, "S_INT"), [p.gain_interface**2]),
    }
    rows = [BudgetRow(name, integrate_rms(psd, chain, grid)) for name, (psd, chain) in chains.items()]
    # two independent samples are differenced
    rows.append(BudgetRow("ktc_cds", math.sqrt(2.0) * ktc_rms(p.temp_k, p.c_sx_f) * math.sqrt(post), "ktc"))
    f = grid.points_hz
    spectra = {"f_hz": f}
    spectra.update({name: _composite(psd, chain, f) for name, (psd, chain) in chains.items()})
    return NoiseBudget(rows, _rss(rows), "detector", spectra)
