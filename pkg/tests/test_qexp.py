import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import fsolve
from scipy.special import expit

from qpusim import qexp
from qpusim.qexp import (
    STATE_0,
    STATE_1,
    STATE_MID,
    BiasScanConfig,
    TunnelingModel,
    autocorrelation,
    bias_scan,
    charging_energy,
    divider_map,
    dot_capacitance,
    extract_probabilities,
    histogram,
    probability_sweep,
    run_trials,
    thermal_ratio,
    tunneling_probability,
)

M = TunnelingModel()


# -- dose-response --------------------------------------------------------


def test_calibration_endpoints():
    assert tunneling_probability(33e-3) <= 0.005
    assert tunneling_probability(78e-3) == pytest.approx(0.95, abs=0.005)
    assert tunneling_probability(55.5e-3) == pytest.approx(0.475, abs=0.05)


def test_calibration_matches_numeric_solve():
    # solve p_max*expit(k*(v - v_mid)) at both endpoints, v_mid fixed halfway
    v_mid = 55.5e-3

    def eqs(x):
        p_max, k = x
        return [
            p_max * expit(k * (33e-3 - v_mid)) - M.p_at_low,
            p_max * expit(k * (78e-3 - v_mid)) - M.p_at_high,
        ]

    p_max, k = fsolve(eqs, [1.0, 200.0], xtol=1e-12)
    assert M.p_max == pytest.approx(p_max, rel=1e-8)
    assert M.slope_per_v == pytest.approx(k, rel=1e-8)


@given(st.floats(0, 0.2), st.floats(0, 0.2))
def test_dose_response_monotone_and_bounded(a, b):
    lo, hi = sorted((a, b))
    p_lo, p_hi = tunneling_probability(lo), tunneling_probability(hi)
    assert 0 <= p_lo <= p_hi <= 1


def test_model_validation():
    with pytest.raises(ValueError):
        TunnelingModel(v_low_v=0.1, v_high_v=0.05)
    with pytest.raises(ValueError):
        TunnelingModel(short_lag_corr=1.0)
    with pytest.raises(ValueError):
        TunnelingModel(midzone_rate=-0.1)
    with pytest.raises(ValueError):
        tunneling_probability(-1e-3)


# -- probability extraction -----------------------------------------------


def test_synthetic_9500_500():
    v = np.r_[np.full(9500, -0.3), np.zeros(500)]
    assert extract_probabilities(v) == (pytest.approx(0.05), pytest.approx(0.95), 0)


def count_oracle(v, width, peak, nb=1):
    centre = round(peak / width)
    return sum(1 for x in v if abs(round(x / width) - centre) <= nb)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-0.6, 0.3), min_size=1, max_size=300), st.integers(0, 100))
def test_accounting_identity(v, extra):
    n_total = len(v) + extra
    p0, p1, disc = extract_probabilities(v, n_total=n_total)
    assert p0 * n_total == pytest.approx(count_oracle(v, 0.05, 0.0))
    assert p1 * n_total == pytest.approx(count_oracle(v, 0.05, -0.3))
    assert p0 + p1 <= 1
    # classified + discarded = trials; the deficit includes unsampled trials
    assert round((p0 + p1) * n_total) + disc == len(v)
    assert 1 - p0 - p1 == pytest.approx((disc + extra) / n_total)


def test_extraction_errors():
    with pytest.raises(ValueError):
        extract_probabilities([0.0], bin_width_v=0.2)  # windows overlap
    with pytest.raises(ValueError):
        extract_probabilities([0.0], peaks_v=(0.0, -0.8))
    with pytest.raises(ValueError):
        extract_probabilities([0.0, 0.1], n_total=1)


# -- trials ---------------------------------------------------------------


@pytest.fixture(scope="module")
def run78():
    return run_trials(M, 78e-3, 10_000, seed=1)


def test_run_at_78mV(run78):
    p0, p1, disc = extract_probabilities(run78)
    assert p1 == pytest.approx(0.95, abs=0.02)
    h = histogram(run78)
    assert h.counts.sum() == len(run78) == 10_000
    assert abs((h.peak0_v - h.peak1_v) - 0.3) <= h.bin_width_v
    assert h.peak0_v == pytest.approx(0.0, abs=h.bin_width_v)


def test_peak_separation_tracks_chain_gain():
    from qpusim.detector import DetectorChainConfig

    m = TunnelingModel(detector=DetectorChainConfig(chain_gain_total=120.0))
    h = histogram(run_trials(m, 78e-3, 4000, seed=2))
    assert abs((h.peak0_v - h.peak1_v) - 120 * 3.75e-3) <= h.bin_width_v


def test_midzone_lands_between_peaks():
    m = TunnelingModel(noise_rms_v=0.0, midzone_rate=0.2)
    res = run_trials(m, 40e-3, 5000, seed=4)
    mid = res.v_out_v[res.states == STATE_MID]
    assert mid.size > 0
    assert np.all((mid >= -0.29 - 1e-9) & (mid <= -0.01 + 1e-9))
    assert np.all(res.v_out_v[res.states == STATE_0] == 0.0)
    assert np.allclose(res.v_out_v[res.states == STATE_1], M.peak1_v)


def test_determinism():
    a = run_trials(M, 60e-3, 2000, seed=9)
    b = run_trials(M, 60e-3, 2000, seed=9)
    c = run_trials(M, 60e-3, 2000, seed=10)
    assert a.to_csv() == b.to_csv()
    assert not np.array_equal(a.v_out_v, c.v_out_v)


def test_short_lag_correlation(run78):
    acf = autocorrelation(run78.states == STATE_1, 10)
    assert acf[0] == 1.0
    assert acf[1] > acf[10]


def test_uncorrelated_trials_pass_independence():
    m = TunnelingModel(short_lag_corr=0.0)
    res = run_trials(m, 55.5e-3, 20_000, seed=5)
    acf = autocorrelation(res.states == STATE_1, 20)
    assert np.all(np.abs(acf[1:]) < 3 / np.sqrt(res.states.size))


def test_sweep_monotone():
    steps = np.linspace(33e-3, 78e-3, 10)
    rows = probability_sweep(M, steps, 10_000, seed=0)
    p1 = [r["p1"] for r in rows]
    p0 = [r["p0"] for r in rows]
    assert p1[0] <= 0.01
    assert all(b >= a for a, b in zip(p1, p1[1:]))
    assert all(b <= a for a, b in zip(p0, p0[1:]))


def test_trials_csv_and_summary(run78):
    rows = list(csv.DictReader(io.StringIO(run78.to_csv())))
    assert len(rows) == 10_000
    assert {int(r["state"]) for r in rows} <= {STATE_0, STATE_1, STATE_MID}
    d = json.loads(qexp.summary_json(run78))
    assert d["n"] == 10_000 and d["p1"] == pytest.approx(0.95, abs=0.02)
    with pytest.raises(ValueError):
        run_trials(M, 78e-3, 0)


# -- autocorrelation ------------------------------------------------------


def test_acf_white_noise():
    x = np.random.default_rng(0).standard_normal(50_000)
    acf = autocorrelation(x, 30)
    assert np.all(np.abs(acf[1:]) < 3 / np.sqrt(x.size))


@pytest.mark.parametrize("phi", [0.3, 0.6, 0.9])
def test_acf_ar1(phi):
    rng = np.random.default_rng(1)
    n = 200_000
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0]
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    acf = autocorrelation(x, 5)
    assert np.allclose(acf, phi ** np.arange(6), atol=0.02)


def test_acf_errors():
    with pytest.raises(ValueError):
        autocorrelation(np.ones(10), 2)
    with pytest.raises(ValueError):
        autocorrelation([1.0, 2.0], 2)


# -- bias scan ------------------------------------------------------------


@pytest.fixture(scope="module")
def scan():
    grid_rd = (0.1, 0.4, 0.7)
    grid_rg = (0.7, 1.0, 1.3)
    return bias_scan(BiasScanConfig(grid_rd, grid_rg, trials_per_point=2000, seed=3))


def test_bias_scan_flags_window(scan):
    want = np.zeros((3, 3), bool)
    want[1, 1] = True
    assert np.array_equal(scan.bimodal, want)
    # outside the window: unimodal at 0 V
    assert abs(scan.mean_v[0, 0]) < 3 * 17.5e-3 / np.sqrt(2000) + 1e-3


def test_bias_scan_mixture_mean(scan):
    p1 = tunneling_probability(60e-3)
    mean = scan.mean_v[1, 1]
    # mixture mean; midzone events add at most a few mV
    assert mean == pytest.approx(-0.3 * p1, abs=0.02)
    assert len(scan.rows()) == 9


def test_bias_scan_validation():
    with pytest.raises(ValueError):
        BiasScanConfig((), (1.0,))
    with pytest.raises(ValueError):
        BiasScanConfig((0.4,), (1.0,), resonance_window=(0.5, 0.3, 0.9, 1.1))


# -- dot physics ----------------------------------------------------------


def test_charging_energy():
    j, ev = charging_energy(35e-18)
    assert ev == pytest.approx(4.58e-3, rel=2e-3)
    assert ev == pytest.approx(4.5e-3, rel=0.02)
    assert j == pytest.approx(1.602176634e-19**2 / 35e-18)
    assert dot_capacitance(ev) == pytest.approx(35e-18, rel=1e-12)
    assert thermal_ratio(ev, 3.0) == pytest.approx(17.7, abs=0.05)


@given(st.floats(1e-19, 1e-15))
def test_charging_energy_inverse(c):
    assert dot_capacitance(charging_energy(c)[1]) == pytest.approx(c, rel=1e-12)


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_divider_map(a, b):
    assert divider_map(45e-3, 0.1) == 4.5e-3
    assert divider_map(0.0) == 0.0
    assert divider_map(a + b) == pytest.approx(divider_map(a) + divider_map(b), abs=1e-15)
    with pytest.raises(ValueError):
        divider_map(a, 1.0)
