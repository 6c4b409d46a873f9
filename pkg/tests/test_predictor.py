import math

import pytest
from hypothesis import given, settings, strategies as st

from dystasim.predictor import (CoeffKind, CoeffStrategy, MonitorState, PredictorConfig, eval_rmse,
                                monitor_update, predict_remaining, sparsity_coeff)
from dystasim.profile import ModelProfile, build_profiles
from dystasim.workload import LayerTrace, ModelPatternKey, Pattern, SampleTrace

KEY = ModelPatternKey("m", Pattern.POINTWISE_RANDOM)
PROF = ModelProfile(KEY, (1.0, 2.0, 3.0, 4.0), (0.5, 0.5, 0.6, 0.2))


def monitor(*sp, capacity=None):
    m = MonitorState(capacity)
    for s in sp:
        monitor_update(m, s)
    return m


def test_gamma_is_one_before_any_layer():
    assert sparsity_coeff(MonitorState(), PROF, CoeffStrategy.last_one()) == (1.0, False)


def test_last_one_density_ratio():
    g, clamped = sparsity_coeff(monitor(0.75), PROF, CoeffStrategy.last_one())
    assert g == pytest.approx(0.25 / 0.5) and not clamped


def test_last_n_and_average_all_sum_densities():
    m = monitor(0.75, 0.5, 0.2)
    # last 2 layers (1, 2): observed densities 0.5 + 0.8, profiled 0.5 + 0.4
    assert sparsity_coeff(m, PROF, CoeffStrategy.last_n(2))[0] == pytest.approx(1.3 / 0.9)
    assert sparsity_coeff(m, PROF, CoeffStrategy.average_all())[0] == pytest.approx(1.55 / 1.4)
    # a window longer than the history uses all of it
    assert sparsity_coeff(m, PROF, CoeffStrategy.last_n(10))[0] == pytest.approx(1.55 / 1.4)


def test_gamma_clamp():
    prof = ModelProfile(KEY, (1.0, 1.0), (0.99, 0.0))
    g, clamped = sparsity_coeff(monitor(0.0), prof, CoeffStrategy.last_one())
    assert (g, clamped) == (20.0, True)
    g, clamped = sparsity_coeff(monitor(1.0), PROF, CoeffStrategy.last_one(), gamma_min=0.1)
    assert (g, clamped) == (0.1, True)


def test_fully_sparse_profile_clamps_high():
    prof = ModelProfile(KEY, (1.0, 1.0), (1.0, 0.0))
    assert sparsity_coeff(monitor(0.3), prof, CoeffStrategy.last_one()) == (20.0, True)


def test_bounded_monitor_keeps_layer_index():
    m = monitor(0.1, 0.2, 0.75, capacity=1)
    assert m.observed() == [0.75] and m.count == 3
    # compares against profiled layer 2 (sparsity 0.6)
    assert sparsity_coeff(m, PROF, CoeffStrategy.last_one())[0] == pytest.approx(0.25 / 0.4)
    with pytest.raises(ValueError):
        sparsity_coeff(m, PROF, CoeffStrategy.average_all())


def test_monitor_rejects_bad_sparsity():
    with pytest.raises(ValueError):
        monitor_update(MonitorState(), 1.5)
    m = monitor_update(MonitorState(), LayerTrace(1.0, 0.25))
    assert m.observed() == [0.25]


def test_predict_remaining():
    assert predict_remaining(PROF, 2.0, 1, alpha=0.5) == pytest.approx(9.0)
    assert predict_remaining(PROF, 3.0, 4) == 0.0
    with pytest.raises(IndexError):
        predict_remaining(PROF, 1.0, 5)


def test_strategy_parse_and_validation():
    assert CoeffStrategy.parse("last_n", 4) == CoeffStrategy(CoeffKind.LAST_N, 4)
    assert str(CoeffStrategy.last_n(3)) == "last_n(3)"
    with pytest.raises(ValueError):
        CoeffStrategy.last_n(0)
    with pytest.raises(ValueError):
        CoeffStrategy.parse("median")
    with pytest.raises(ValueError):
        PredictorConfig(alpha=0)
    with pytest.raises(ValueError):
        PredictorConfig(gamma_min=2.0)


def test_rmse_zero_when_traces_equal_profile():
    t = SampleTrace(KEY, tuple(LayerTrace(l, s) for l, s in zip(PROF.layer_avg_latency, PROF.layer_avg_sparsity)))
    store = build_profiles([t])
    for strat in (CoeffStrategy.last_one(), CoeffStrategy.last_n(3), CoeffStrategy.average_all()):
        assert eval_rmse([t], store, strat) == 0.0


def test_rmse_hand_example():
    prof = ModelProfile(KEY, (1.0, 1.0), (0.5, 0.5))
    t = SampleTrace(KEY, (LayerTrace(0.5, 0.75), LayerTrace(0.5, 0.75)))
    # boundary 1: gamma 0.5, predicted 0.5, true 0.5 -> error 0
    assert eval_rmse([t], {KEY: prof}, CoeffStrategy.last_one()) == 0.0
    t2 = SampleTrace(KEY, (LayerTrace(0.5, 0.75), LayerTrace(1.0, 0.5)))
    # predicted 0.5, true 1.0, normalised by profiled total 2.0
    assert eval_rmse([t2], {KEY: prof}, CoeffStrategy.last_one()) == pytest.approx(0.25)


def test_rmse_single_layer_uses_profile():
    prof = ModelProfile(KEY, (2.0,), (0.0,))
    t = SampleTrace(KEY, (LayerTrace(1.0, 0.0),))
    assert eval_rmse([t], {KEY: prof}, CoeffStrategy.last_one()) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        eval_rmse([], {KEY: prof}, CoeffStrategy.last_one())


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=4), st.sampled_from(["last_one", "last_n", "average_all"]))
def test_gamma_always_within_clamp(obs, name):
    g, _ = sparsity_coeff(monitor(*obs), PROF, CoeffStrategy.parse(name, 2))
    assert 0.05 <= g <= 20.0 and math.isfinite(g)
