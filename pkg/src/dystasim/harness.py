"""Sweep runner: one simulation per (scheduler, SLO multiplier, rate, seed) cell."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .baselines import make_scheduler
from .config import ScenarioConfig, synth_spec
from .metrics import (MetricsReport, aggregate_seeds, write_aggregate, write_requests,
                      write_summary)
from .presets import get_preset
from .profile import ProfileStore, build_profiles, load_profiles
from .sim import SimulationError, run_sim
from .workload import SampleTrace, WorkloadSpec, gen_arrivals, load_traces, synth_traces

log = logging.getLogger(__name__)

Cell = tuple[str, float, float, int]


class CellError(RuntimeError):
    def __init__(self, cell: Cell, cause: BaseException):
        self.cell = cell
        sched, slo, rate, seed = cell
        super().__init__(f"cell scheduler={sched} slo_multiplier={slo:g} arrival_rate={rate:g} "
                         f"seed={seed}: {cause}")


def load_pool(config: ScenarioConfig) -> tuple[list[SampleTrace], ProfileStore]:
    """Trace pool and the profiles the schedulers see."""
    w = config.workload
    if w.traces:
        pool = load_traces(config.resolve(w.traces))
    elif w.synth:
        pool = [t for table in w.synth for t in synth_traces(synth_spec(table), w.pool_seed)]
    else:
        pool = get_preset(w.preset).pool(w.pool_seed)
    profiles = load_profiles(config.resolve(w.profiles)) if w.profiles else build_profiles(pool)
    return pool, profiles


def run_cell(config: ScenarioConfig, pool: Sequence[SampleTrace], profiles: ProfileStore,
             cell: Cell) -> MetricsReport:
    sched_name, slo, rate, seed = cell
    reqs = gen_arrivals(WorkloadSpec(pool, rate, config.num_requests, slo, seed))
    sched = make_scheduler(sched_name, config.dysta_config(), config.sdrm3_config(),
                           config.prema_priorities(), int(config.prema.get("default_priority", 1)))
    try:
        records = run_sim(reqs, profiles, sched, config.sim_config())
    except (SimulationError, KeyError, ValueError) as e:
        raise CellError(cell, e) from e
    return MetricsReport.from_records(records, seed, sched_name, slo, rate)


# Per-process state for parallel sweeps, so the pool is built once per worker.
_worker: dict = {}


def _init_worker(config: ScenarioConfig) -> None:
    _worker["config"] = config
    _worker["pool"], _worker["profiles"] = load_pool(config)


def _run_in_worker(cell: Cell) -> MetricsReport:
    return run_cell(_worker["config"], _worker["pool"], _worker["profiles"], cell)


def run_cells(config: ScenarioConfig, jobs: int = 1) -> list[MetricsReport]:
    """Run every cell; the result order is the config's cell order regardless of ``jobs``."""
    cells = config.cells()
    if jobs <= 1 or len(cells) == 1:
        pool, profiles = load_pool(config)
        return [run_cell(config, pool, profiles, c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(config,)) as ex:
        return list(ex.map(_run_in_worker, cells, chunksize=max(1, len(cells) // (4 * jobs))))


@dataclass
class ExperimentResult:
    reports: list[MetricsReport]
    out_dir: Path


def run_experiment(config: ScenarioConfig, out_dir: str | Path | None = None, jobs: int = 1) -> ExperimentResult:
    out = Path(out_dir) if out_dir is not None else Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    reports = run_cells(config, jobs)
    write_summary(reports, out)
    if config.per_request:
        write_requests(reports, out)
    write_aggregate(aggregate_cells(reports), out)
    write_plot_data(reports, out)
    (out / "config.toml").write_text(config.dumps())
    # The only file with wall-clock content; the CSVs stay byte-identical across reruns.
    (out / "run_info.json").write_text(json.dumps(
        {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"), "wall_s": round(time.time() - t0, 3),
         "cells": len(reports)}, indent=1) + "\n")
    return ExperimentResult(reports, out)


def aggregate_cells(reports: Sequence[MetricsReport]):
    groups: dict[tuple, list[MetricsReport]] = {}
    for r in reports:
        groups.setdefault((r.scheduler, r.slo_multiplier, r.arrival_rate), []).append(r)
    return [(k, aggregate_seeds(v)) for k, v in groups.items()]


PLOT_KINDS = ("tradeoff", "vs_slo", "vs_rate")
_PLOT_COLUMNS = {
    "tradeoff": ("scheduler", "slo_multiplier", "rate", "antt", "violation"),
    "vs_slo": ("scheduler", "rate", "slo_multiplier", "antt", "violation_rate", "stp", "seeds"),
    "vs_rate": ("scheduler", "slo_multiplier", "rate", "antt", "violation_rate", "stp", "seeds"),
}


def emit_plot_data(reports: Sequence[MetricsReport], kind: str, out_dir: str | Path,
                   schedulers: Sequence[str] | None = None, slo_values: Sequence[float] | None = None,
                   rates: Sequence[float] | None = None) -> Path:
    """Write ``<kind>.csv`` with seed-averaged metrics in long format.

    The requested axes default to whatever the reports contain; if any
    (scheduler, slo_multiplier, rate) combination is missing, nothing is
    written and the absent cells are listed in the error.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {', '.join(PLOT_KINDS)}")
    agg = dict(aggregate_cells(reports))
    schedulers = list(schedulers) if schedulers is not None else list(dict.fromkeys(k[0] for k in agg))
    slo_values = list(slo_values) if slo_values is not None else sorted({k[1] for k in agg})
    rates = list(rates) if rates is not None else sorted({k[2] for k in agg})
    missing = [(s, m, r) for s in schedulers for m in slo_values for r in rates if (s, m, r) not in agg]
    if missing:
        listed = "; ".join(f"{s} M={m:g} rate={r:g}" for s, m, r in missing)
        raise ValueError(f"{kind}: missing cells: {listed}")

    rows = []
    for s in schedulers:
        if kind == "vs_slo":
            keys = [(s, m, r) for r in rates for m in slo_values]
        else:
            keys = [(s, m, r) for m in slo_values for r in rates]
        for key in keys:
            a = agg[key]
            _, m, r = key
            if kind == "tradeoff":
                rows.append((s, m, r, a["antt"].mean, a["violation_rate"].mean))
            elif kind == "vs_slo":
                rows.append((s, r, m, a["antt"].mean, a["violation_rate"].mean, a["stp"].mean, a["antt"].n))
            else:
                rows.append((s, m, r, a["antt"].mean, a["violation_rate"].mean, a["stp"].mean, a["antt"].n))
    path = Path(out_dir) / f"{kind}.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_PLOT_COLUMNS[kind])
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def write_plot_data(reports: Sequence[MetricsReport], out_dir: str | Path) -> list[Path]:
    """Trade-off table always; the curves when their axis has more than one value."""
    paths = [emit_plot_data(reports, "tradeoff", out_dir)]
    if len({r.slo_multiplier for r in reports}) > 1:
        paths.append(emit_plot_data(reports, "vs_slo", out_dir))
    if len({r.arrival_rate for r in reports}) > 1:
        paths.append(emit_plot_data(reports, "vs_rate", out_dir))
    return paths


def pareto_front(points: dict[str, tuple[float, float]]) -> set[str]:
    """Names whose (violation, antt) point no other point dominates (both <=, one <)."""
    front = set()
    for name, (v, a) in points.items():
        dominated = any(v2 <= v and a2 <= a and (v2 < v or a2 < a)
                        for other, (v2, a2) in points.items() if other != name)
        if not dominated:
            front.add(name)
    return front


def cell_means(reports: Sequence[MetricsReport]) -> dict[tuple, dict[str, float]]:
    return {k: {name: s.mean for name, s in v.items()} for k, v in aggregate_cells(reports)}


def pooled_std(a: float, b: float) -> float:
    return math.sqrt((a * a + b * b) / 2.0)
