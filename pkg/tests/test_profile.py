import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from dystasim.profile import (ModelProfile, ProfileStore, UnknownModelError, build_profiles, load_profiles,
                              lookup, write_profiles)
from dystasim.workload import LayerTrace, ModelPatternKey, Pattern, SampleTrace, TraceError

KEY_A = ModelPatternKey("bert", Pattern.DYNAMIC_ATTENTION)
KEY_B = ModelPatternKey("resnet", Pattern.CHANNELWISE)


def trace(key, lat, sp, sid="0"):
    return SampleTrace(key, tuple(LayerTrace(l, s) for l, s in zip(lat, sp)), sid)


def test_profile_is_per_layer_mean():
    traces = [trace(KEY_A, (1.0, 2.0, 3.0), (0.1, 0.2, 0.3), "0"),
              trace(KEY_A, (3.0, 4.0, 5.0), (0.3, 0.4, 0.5), "1")]
    p = build_profiles(traces)[KEY_A]
    assert p.layer_avg_latency == (2.0, 3.0, 4.0)
    assert p.layer_avg_sparsity == pytest.approx((0.2, 0.3, 0.4))
    assert p.avg_total_latency == 9.0
    assert [p.remaining_latency(j) for j in range(4)] == [9.0, 7.0, 4.0, 0.0]


def test_profile_matches_brute_force_on_two_patterns():
    rng = random.Random(5)
    traces = []
    for key, L in ((KEY_A, 4), (KEY_B, 7)):
        for s in range(30):
            traces.append(trace(key, [rng.uniform(1e-4, 1e-2) for _ in range(L)],
                                [rng.uniform(0, 1) for _ in range(L)], str(s)))
    store = build_profiles(traces)
    assert set(store) == {KEY_A, KEY_B}
    for key in (KEY_A, KEY_B):
        mine = [t for t in traces if t.model_key == key]
        for j in range(mine[0].num_layers):
            lat = sum(t.latencies[j] for t in mine) / len(mine)
            sp = sum(t.sparsities[j] for t in mine) / len(mine)
            assert math.isclose(store[key].layer_avg_latency[j], lat, rel_tol=1e-12)
            assert math.isclose(store[key].layer_avg_sparsity[j], sp, rel_tol=1e-12, abs_tol=1e-15)


def test_unknown_key_raises():
    store = build_profiles([trace(KEY_A, (1.0,), (0.0,))])
    with pytest.raises(UnknownModelError, match="resnet"):
        lookup(store, KEY_B)
    with pytest.raises(KeyError):
        store[KEY_B]


def test_mismatched_layer_counts_rejected():
    with pytest.raises(ValueError, match="layer count"):
        build_profiles([trace(KEY_A, (1.0,), (0.0,)), trace(KEY_A, (1.0, 1.0), (0.0, 0.0), "1")])
    with pytest.raises(ValueError):
        build_profiles([])


def test_profile_file_roundtrip(tmp_path):
    traces = [trace(KEY_A, (0.1, 0.2), (0.5, 0.25)), trace(KEY_B, (0.3,), (0.0,))]
    store = build_profiles(traces)
    write_profiles(store, tmp_path / "p.csv")
    back = load_profiles(tmp_path / "p.csv")
    assert dict(back) == dict(store)


def test_profile_file_rejects_sample_rows(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("model_name,pattern,sample_id,layer_idx,latency_s,sparsity\nbert,dense,7,0,0.1,0.0\n")
    with pytest.raises(TraceError):
        load_profiles(p)


def test_store_rejects_duplicate_keys():
    p = ModelProfile(KEY_A, (1.0,), (0.0,))
    with pytest.raises(ValueError):
        ProfileStore([p, p])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.tuples(st.floats(1e-6, 1), st.floats(0, 1)), min_size=3, max_size=3),
                min_size=1, max_size=12), st.randoms())
def test_profile_is_invariant_to_trace_order(rows, rnd):
    traces = [trace(KEY_A, [l for l, _ in r], [s for _, s in r], str(i)) for i, r in enumerate(rows)]
    shuffled = list(traces)
    rnd.shuffle(shuffled)
    assert build_profiles(traces)[KEY_A] == build_profiles(shuffled)[KEY_A]
