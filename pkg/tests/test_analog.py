import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpusim import analog
from qpusim.analog import (
    BiasLimits,
    BiasRangeError,
    InjectorConfig,
    LeakageModel,
    SigmaDeltaSequencer,
    VdacPulse,
    VdacStage,
    apply_droop,
    injector_step_v,
    injector_waveform,
    vdac_pulse,
    vdac_ramp,
)

COARSE = VdacStage()
FINE = VdacStage(c1_f=COARSE.c1_f / 16)
SEQ = SigmaDeltaSequencer()


# -- oracle ---------------------------------------------------------------
# Pulse-by-pulse recurrence on bare floats.  Each pair is CH+SC (up) or
# DC+SC (down); a stage stops when the next pair's step is at least twice
# the remaining error.


def recurrence(c1, c2, vref, v2, target):
    r = c1 / (c1 + c2)
    out = []
    while True:
        err = target - v2
        if err > 0 and (vref - v2) * r < 2 * err:
            v2 = (c1 * vref + c2 * v2) / (c1 + c2)
        elif err < 0 and v2 * r < -2 * err:
            v2 = (c1 * 0.0 + c2 * v2) / (c1 + c2)
        else:
            return out
        out.append(v2)


def oracle_ramp(coarse, fine, target):
    a = recurrence(coarse.c1_f, coarse.c2_f, coarse.vref_v, coarse.v2_v, target)
    start = a[-1] if a else coarse.v2_v
    b = recurrence(fine.c1_f, fine.c2_f, fine.vref_v, start, target)
    return a, b


# -- single pulses --------------------------------------------------------


def test_equal_caps_midpoint():
    s = VdacStage(c1_f=1e-15, c2_f=1e-15, v1_v=0.8, v2_v=0.0)
    s = vdac_pulse(s, VdacPulse.SC)
    assert s.v1_v == s.v2_v == pytest.approx(0.4)


def test_pulse_kinds():
    s = VdacStage(v1_v=0.3, v2_v=0.1)
    assert vdac_pulse(s, "DC").v1_v == 0
    assert vdac_pulse(s, "CH").v1_v == s.vref_v
    with pytest.raises(ValueError):
        vdac_pulse(s, "XX")


def test_ch_sc_converges_monotonically_to_vref():
    s = VdacStage(c1_f=0.1e-12, c2_f=1e-12)
    r = s.share_ratio
    prev, v = 0.0, 0.0
    for _ in range(200):
        s = vdac_pulse(vdac_pulse(s, "CH"), "SC")
        v = v + (s.vref_v - v) * r  # fixed-point oracle
        assert s.v2_v == pytest.approx(v, rel=1e-12)
        assert s.v2_v > prev
        prev = s.v2_v
    assert s.v2_v < s.vref_v
    assert s.vref_v - s.v2_v < 1e-8


def test_coarse_resolution_near_target_is_300uV():
    s = VdacStage(v2_v=0.4)
    assert s.step_up_v() == pytest.approx(300e-6, rel=0.01)
    assert s.step_down_v() == pytest.approx(300e-6, rel=0.01)


@settings(max_examples=200)
@given(
    st.floats(1e-17, 1e-12),
    st.floats(1e-17, 1e-12),
    st.lists(st.sampled_from(["DC", "CH", "SC"]), max_size=60),
)
def test_charge_conservation_and_bounds(c1, c2, seq):
    s = VdacStage(c1_f=c1, c2_f=c2)
    for p in seq:
        before = s.charge_c
        s = vdac_pulse(s, p)
        if p == "SC":
            assert s.charge_c == pytest.approx(before, rel=1e-12, abs=1e-30)
        assert abs(s.v2_v) <= s.vref_v * (1 + 1e-12)


# -- ramp -----------------------------------------------------------------


@pytest.mark.parametrize("target", [0.05, 0.2, 0.3, 0.4, 0.5])
def test_ramp_matches_recurrence_oracle(target):
    res = vdac_ramp(COARSE, FINE, SEQ, target)
    a, b = oracle_ramp(COARSE, FINE, target)
    assert res.coarse_pairs == len(a) and res.fine_pairs == len(b)
    assert list(res.v_out_v) == a + b  # same arithmetic, exact
    assert np.allclose(res.time_s, 2 * SEQ.period_s * np.arange(1, len(a) + len(b) + 1))
    assert res.settle_time_s <= 100e-6
    assert abs(res.final_v - target) <= FINE.share_ratio * FINE.vref_v
    assert np.all(np.diff(res.v_out_v[: res.coarse_pairs]) > 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 0.5))
def test_ramp_oracle_property(target):
    res = vdac_ramp(COARSE, FINE, SEQ, target)
    a, b = oracle_ramp(COARSE, FINE, target)
    assert list(res.v_out_v) == a + b
    assert abs(res.final_v - target) <= FINE.step_up_v() + FINE.vref_v * FINE.share_ratio


def test_ramp_geometric_approach():
    res = vdac_ramp(COARSE, FINE, SEQ, 0.4)
    gap = COARSE.vref_v - res.v_out_v[: res.coarse_pairs]
    ratio = gap[1:] / gap[:-1]
    assert np.allclose(ratio, 1 - COARSE.share_ratio, rtol=1e-9)


def test_ramp_trivial_and_errors():
    res = vdac_ramp(COARSE, FINE, SEQ, 0.0)
    assert res.pulses == [] and res.final_v == 0.0
    with pytest.raises(BiasRangeError):
        vdac_ramp(COARSE, FINE, SEQ, 0.6)
    with pytest.raises(BiasRangeError):
        vdac_ramp(COARSE, FINE, SEQ, -0.2)


def test_pulse_sequence_shape():
    res = vdac_ramp(COARSE, FINE, SEQ, 0.01)
    assert len(res.pulses) == 2 * (res.coarse_pairs + res.fine_pairs)
    assert all(p[1] == "SC" for p in res.pulses[1::2])
    assert {p[1] for p in res.pulses[::2]} <= {"CH", "DC"}


def test_sequencer_validation():
    assert SEQ.period_s == pytest.approx(8e-9)
    assert SEQ.target_v(0.8) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        SigmaDeltaSequencer(input_code=256)
    with pytest.raises(ValueError):
        SigmaDeltaSequencer(pulse_width_s=9e-9)


def test_bias_limits():
    lim = BiasLimits()
    assert lim.v_max_v == pytest.approx(0.5)
    assert lim.v_min_v == pytest.approx(-0.9)
    with pytest.raises(ValueError):
        BiasLimits(v_th_v=1.0, v_dsat_v=0.9)


# -- droop ----------------------------------------------------------------


def test_droop_values():
    assert 0.4 - apply_droop(0.4, 600e-6) == pytest.approx(5e-3)
    assert 0.4 - apply_droop(0.4, 100e-6) == pytest.approx(0.8333e-3, rel=1e-3)
    assert apply_droop(0.4, 0.0) == 0.4
    with pytest.raises(ValueError):
        apply_droop(0.4, -1.0)


@given(st.floats(-0.9, 0.5), st.floats(0, 1e-3), st.floats(0, 1e-3))
def test_droop_linearity(v, a, b):
    assert apply_droop(v, a + b) == pytest.approx(apply_droop(apply_droop(v, a), b), abs=1e-15)


def test_leakage_table_scaling(tmp_path):
    path = tmp_path / "leak.csv"
    path.write_text("T_K,I_A\n3,1e-9\n100,4e-9\n300,1e-8\n")
    lm = analog.load_leakage_csv(path)
    assert lm.rate_at(3.0) == pytest.approx(lm.droop_rate_v_per_s)
    assert lm.rate_at(100.0) == pytest.approx(4 * lm.droop_rate_v_per_s)
    with pytest.raises(ValueError):
        LeakageModel(temperature_k=(3, 10), leakage_a=(2e-9, 1e-9))


def test_bundled_leakage_table_is_monotone():
    from importlib.resources import files

    lm = analog.load_leakage_csv(files("qpusim.data").joinpath("leakage_illustrative.csv"))
    assert lm.rate_at(300.0) > lm.rate_at(77.0) > lm.rate_at(3.0)


# -- injector -------------------------------------------------------------


def oracle_injector_step(cu1, cu3, v_in):
    # output node: Cu1 to the driven plate, Cu3 to ground; charge on the
    # floating node is conserved when the plate moves 0 -> v_in
    a = np.array([[cu1 + cu3]])
    rhs = np.array([cu1 * v_in])
    return float(np.linalg.solve(a, rhs)[0])


@pytest.mark.parametrize("code", [0, 1, 17, 64, 100, 127, 255])
def test_injector_step_matches_charge_oracle(code):
    cfg = InjectorConfig(code=code)
    want = oracle_injector_step(cfg.cu1_f, cfg.cu3_f, code / 256 * cfg.vref_v)
    assert injector_step_v(cfg) == pytest.approx(want, rel=1e-12, abs=1e-18)


@given(st.integers(0, 127))
def test_injector_linearity(k):
    cfg = InjectorConfig()
    assert abs(injector_step_v(cfg, 2 * k) - 2 * injector_step_v(cfg, k)) <= cfg.lsb_v
    assert injector_step_v(cfg, 0) == 0


def test_step_range_covers_tunnelling_sweep():
    cfg = InjectorConfig()
    for step in (33e-3, 78e-3):
        code = analog.code_for_step(step, cfg)
        assert abs(injector_step_v(cfg, code) - step) <= cfg.lsb_v / 2


def test_injector_waveform():
    flat = injector_waveform(InjectorConfig(code=0, v_bias_v=0.2), 50e-9, 100e-9)
    assert [e.level for e in flat.edges] == [0.0, 0.2]
    tl = injector_waveform(InjectorConfig(code=128, v_bias_v=0.2), 50e-9, 100e-9)
    assert tl.level_at("injector", 99e-9) == 0.2
    assert tl.level_at("injector", 100e-9) == pytest.approx(0.3)
    with pytest.raises(BiasRangeError):
        injector_waveform(InjectorConfig(code=255, v_bias_v=0.45), 0, 1e-9)
    with pytest.raises(ValueError):
        injector_waveform(InjectorConfig(), 2e-9, 1e-9)


# -- IDAC -----------------------------------------------------------------


def test_idac_endpoints_and_mapping():
    assert analog.idac_current(0) == pytest.approx(1e-9)
    assert analog.idac_current(255) == pytest.approx(1e-6)
    for code in (51, 128, 200):
        want = np.exp(np.interp(code, [0, 255], np.log([1e-9, 1e-6])))
        assert analog.idac_current(code) == pytest.approx(want, rel=1e-12)
    lin = analog.IdacReplica(mapping="linear")
    assert analog.idac_current(255, lin) == pytest.approx(1e-6)
    assert analog.idac_vrdpre(0) < 0  # negative levels reachable
    assert analog.idac_vrdpre(255) == pytest.approx(-1.0 + 0.45 + 0.5)
    with pytest.raises(ValueError):
        analog.idac_current(256)
