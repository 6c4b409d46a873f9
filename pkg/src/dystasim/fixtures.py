"""Deterministic fixture sets: small hand-checkable scenarios and the benchmark pool.

Each fixture directory holds ``traces.csv``, ``workload.csv``, optionally
``profiles.csv`` (when the scheduler's profile should differ from the traces)
and ``manifest.json`` describing what the files contain.
"""
from __future__ import annotations

import json
import statistics
from importlib import resources
from pathlib import Path

from .baselines import Sdrm3Config, Sdrm3Scheduler
from .config import ScenarioConfig, WorkloadSource
from .metrics import MetricsReport
from .presets import ATTNN_LIKE
from .profile import ModelProfile, ProfileStore, build_profiles, load_profiles, write_profiles
from .sim import run_sim
from .workload import (LayerTrace, ModelPatternKey, Pattern, Request, SampleTrace, WorkloadSpec,
                       assign_slos, gen_arrivals, group_by_key, load_requests, load_traces,
                       write_requests, write_traces)

FIXTURE_KINDS = ("fig5", "tri_basic", "synth_benchmark")

BENCH_RATE = 30.0
BENCH_SLO = 10.0
BENCH_REQUESTS = 1000
BENCH_SEEDS = (0, 1, 2, 3, 4)
SDRM3_GRID = tuple(round(0.1 * i, 1) for i in range(11))


def bundled_dir(kind: str | None = None) -> Path:
    """Directory of the fixtures shipped inside the package."""
    root = Path(str(resources.files("dystasim") / "data" / "fixtures"))
    return root / kind if kind else root


def _trace(key: ModelPatternKey, lat, sp, sample_id: str) -> SampleTrace:
    return SampleTrace(key, tuple(LayerTrace(l, s) for l, s in zip(lat, sp)), sample_id)


def _profile(key: ModelPatternKey, lat, sp) -> ModelProfile:
    return ModelProfile(key, tuple(lat), tuple(sp))


def _write_set(out: Path, traces, requests, profiles: ProfileStore | None, manifest: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_traces(traces, out / "traces.csv")
    write_requests(requests, out / "workload.csv")
    if profiles is not None:
        write_profiles(profiles, out / "profiles.csv")
    layers = {str(k): len(v[0].layers) for k, v in sorted(group_by_key(traces).items())}
    manifest = {"kind": manifest.pop("kind"), "layers_per_model": layers, **manifest}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=False) + "\n")


def fig5_fixture(out: Path) -> None:
    """Two requests where only the sparsity-aware scheduler preempts in time.

    Request 0's profile promises a short job (sparse layers) but the input is
    dense, so each layer takes five times the profiled latency. Request 1
    arrives during request 0's first layer. Sparsity-blind SJF trusts the
    profile, keeps request 0 and request 1 misses its deadline; a scheduler
    that sees the dense first layer switches to request 1 and both finish in time.
    """
    a = ModelPatternKey("net_a", Pattern.POINTWISE_RANDOM)
    b = ModelPatternKey("net_b", Pattern.DENSE)
    profiles = ProfileStore([_profile(a, [0.5] * 4, [0.8] * 4), _profile(b, [1.0] * 4, [0.5] * 4)])
    traces = [_trace(a, [2.5] * 4, [0.0] * 4, "0"), _trace(b, [1.0] * 4, [0.5] * 4, "0")]
    reqs = assign_slos([Request(0, a, 0.0, traces[0]), Request(1, b, 0.5, traces[1])], 2.0)
    _write_set(out, traces, reqs, profiles, {
        "kind": "fig5", "slo_multiplier": 2.0,
        "expected_violations": {"sjf": 1, "dysta": 0},
        "violated_under_sjf": [1],
        "dysta": {"coeff_strategy": "last_one", "alpha": 1.0},
    })


def tri_basic_fixture(out: Path) -> None:
    """Three 3-layer requests of three models; profiles deliberately differ from the traces."""
    ka = ModelPatternKey("alpha", Pattern.POINTWISE_RANDOM)
    kb = ModelPatternKey("beta", Pattern.BLOCK_NM)
    kc = ModelPatternKey("gamma", Pattern.CHANNELWISE)
    traces = [
        _trace(ka, [0.5, 0.5, 0.5], [0.75, 0.75, 0.75], "0"),
        _trace(kb, [0.5, 0.5, 0.5], [0.7, 0.7, 0.7], "0"),
        _trace(kc, [0.6, 0.7, 0.5], [0.2, 0.1, 0.3], "0"),
    ]
    profiles = ProfileStore([
        _profile(ka, [1.0, 1.0, 1.0], [0.5, 0.5, 0.5]),
        _profile(kb, [0.6, 0.6, 0.6], [0.6, 0.6, 0.6]),
        _profile(kc, [0.5, 0.5, 0.5], [0.3, 0.3, 0.3]),
    ])
    reqs = assign_slos([Request(0, ka, 0.0, traces[0]), Request(1, kb, 0.25, traces[1]),
                        Request(2, kc, 0.5, traces[2])], 2.5)
    _write_set(out, traces, reqs, profiles, {"kind": "tri_basic", "slo_multiplier": 2.5})


def benchmark_workloads(pool, seeds=BENCH_SEEDS) -> dict[int, list[Request]]:
    return {s: gen_arrivals(WorkloadSpec(pool, BENCH_RATE, BENCH_REQUESTS, BENCH_SLO, s)) for s in seeds}


def tune_sdrm3(pool, profiles, seeds=BENCH_SEEDS, grid=SDRM3_GRID) -> tuple[float, list[dict]]:
    """Grid-search SDRM3's urgency/fairness weight: fewest violations, then lowest ANTT."""
    work = benchmark_workloads(pool, seeds)
    table = []
    for a in grid:
        reps = [MetricsReport.from_records(run_sim(work[s], profiles, Sdrm3Scheduler(Sdrm3Config(a))))
                for s in seeds]
        table.append({"alpha_weight": a,
                      "violation_rate": statistics.fmean(r.violation_rate for r in reps),
                      "antt": statistics.fmean(r.antt for r in reps)})
    best = min(table, key=lambda row: (row["violation_rate"], row["antt"]))
    return best["alpha_weight"], table


def synth_benchmark_fixture(out: Path) -> None:
    """The attention-model pool plus one 1000-request workload per seed."""
    pool = ATTNN_LIKE.pool(0)
    profiles = build_profiles(pool)
    out.mkdir(parents=True, exist_ok=True)
    work = benchmark_workloads(pool)
    for seed, reqs in work.items():
        write_requests(reqs, out / f"workload_seed{seed}.csv")
    best, table = tune_sdrm3(pool, profiles)
    _write_set(out, pool, work[BENCH_SEEDS[0]], None, {
        "kind": "synth_benchmark", "preset": ATTNN_LIKE.name, "pool_seed": 0,
        "arrival_rate": BENCH_RATE, "slo_multiplier": BENCH_SLO,
        "num_requests": BENCH_REQUESTS, "seeds": list(BENCH_SEEDS),
        "sdrm3_alpha_weight": best, "sdrm3_grid": table,
    })
    cfg = ScenarioConfig(
        schedulers=["fcfs", "sjf", "prema", "planaria", "sdrm3", "oracle", "dysta"],
        seeds=list(BENCH_SEEDS), slo_multiplier=[float(BENCH_SLO)], arrival_rate=[float(BENCH_RATE)],
        num_requests=BENCH_REQUESTS, output_dir="results/synth_benchmark",
        workload=WorkloadSource(preset=None, traces="traces.csv"), sdrm3={"alpha_weight": best})
    (out / "benchmark.toml").write_text(
        "# Runs the committed benchmark pool; workloads are regenerated from the seeds.\n" + cfg.dumps())


def load_fixture(path: str | Path, workload: str = "workload.csv"):
    """(traces, requests, profiles, manifest) of a fixture directory.

    Profiles come from ``profiles.csv`` when present, else from the traces.
    """
    path = Path(path)
    traces = load_traces(path / "traces.csv")
    requests = load_requests(path / workload, traces)
    prof_file = path / "profiles.csv"
    profiles = load_profiles(prof_file) if prof_file.exists() else build_profiles(traces)
    manifest = json.loads((path / "manifest.json").read_text())
    return traces, requests, profiles, manifest


def gen_fixture(kind: str, out_dir: str | Path) -> Path:
    builders = {"fig5": fig5_fixture, "tri_basic": tri_basic_fixture,
                "synth_benchmark": synth_benchmark_fixture}
    if kind not in builders:
        raise ValueError(f"unknown fixture kind {kind!r}; choose from {', '.join(FIXTURE_KINDS)}")
    out = Path(out_dir)
    builders[kind](out)
    return out
