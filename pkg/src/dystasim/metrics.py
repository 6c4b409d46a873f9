"""ANTT, SLO violation rate and throughput, plus seed aggregation and report files."""
from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .sim import RunRecord

SUMMARY_COLUMNS = ("scheduler", "slo_multiplier", "arrival_rate", "seed",
                   "antt", "violation_rate", "stp", "preemptions")
REQUEST_COLUMNS = ("scheduler", "slo_multiplier", "arrival_rate", "seed", "request_id", "model_name",
                   "pattern", "arrival", "deadline", "completion", "t_isol", "turnaround",
                   "normalized_turnaround", "violated", "preemptions", "dropped")


def _completed(records: Sequence[RunRecord]) -> list[RunRecord]:
    if not records:
        raise ValueError("no run records")
    return [r for r in records if not r.dropped]


def compute_antt(records: Sequence[RunRecord]) -> float:
    """Mean of turnaround / isolated latency over completed requests."""
    done = _completed(records)
    if not done:
        raise ValueError("no completed requests")
    return math.fsum(r.normalized_turnaround for r in done) / len(done)


def compute_violation_rate(records: Sequence[RunRecord]) -> float:
    if not records:
        raise ValueError("no run records")
    return sum(r.violated for r in records) / len(records)


def compute_stp(records: Sequence[RunRecord]) -> float:
    """Completed requests per second of makespan (first arrival to last completion)."""
    done = _completed(records)
    if not done:
        raise ValueError("no completed requests")
    span = max(r.completion for r in done) - min(r.arrival for r in records)
    if not span > 0:
        raise ValueError("zero time span")
    return len(done) / span


@dataclass
class MetricsReport:
    antt: float
    violation_rate: float
    stp: float
    total_preemptions: int
    seed: int = 0
    scheduler: str = ""
    slo_multiplier: float = math.nan
    arrival_rate: float = math.nan
    per_request: list[RunRecord] = field(default_factory=list, repr=False)

    @classmethod
    def from_records(cls, records: Sequence[RunRecord], seed: int = 0, scheduler: str = "",
                     slo_multiplier: float = math.nan, arrival_rate: float = math.nan) -> "MetricsReport":
        return cls(compute_antt(records), compute_violation_rate(records), compute_stp(records),
                   sum(r.preemptions for r in records), seed, scheduler, slo_multiplier,
                   arrival_rate, list(records))

    def summary_row(self) -> dict:
        return {"scheduler": self.scheduler, "slo_multiplier": self.slo_multiplier,
                "arrival_rate": self.arrival_rate, "seed": self.seed, "antt": self.antt,
                "violation_rate": self.violation_rate, "stp": self.stp,
                "preemptions": self.total_preemptions}


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float
    n: int


def aggregate_seeds(reports: Sequence[MetricsReport]) -> dict[str, MetricSummary]:
    """Mean and sample standard deviation of each metric across seeds."""
    if not reports:
        raise ValueError("need at least one report")
    out = {}
    for name in ("antt", "violation_rate", "stp", "total_preemptions"):
        vals = [float(getattr(r, name)) for r in reports]
        std = statistics.stdev(vals) if len(vals) > 1 else 0.0
        out[name] = MetricSummary(math.fsum(vals) / len(vals), std, len(vals))
    return out


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_summary(reports: Iterable[MetricsReport], out_dir: str | Path) -> None:
    """summary.csv plus its JSON mirror summary.json."""
    out_dir = Path(out_dir)
    rows = [r.summary_row() for r in reports]
    with (out_dir / "summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])
    (out_dir / "summary.json").write_text(json.dumps(rows, indent=1) + "\n")


def write_requests(reports: Iterable[MetricsReport], out_dir: str | Path) -> None:
    with (Path(out_dir) / "requests.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REQUEST_COLUMNS)
        for rep in reports:
            for r in rep.per_request:
                w.writerow([_fmt(v) for v in (
                    rep.scheduler, rep.slo_multiplier, rep.arrival_rate, rep.seed, r.id,
                    r.key.model_name, r.key.pattern.value, r.arrival, r.deadline,
                    "" if r.completion is None else r.completion, r.t_isol,
                    r.turnaround, r.normalized_turnaround, r.violated, r.preemptions, r.dropped)])


def write_aggregate(cells: Iterable[tuple[tuple, dict[str, MetricSummary]]], out_dir: str | Path) -> None:
    """aggregate.csv: one row per (scheduler, slo_multiplier, arrival_rate) cell."""
    with (Path(out_dir) / "aggregate.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("scheduler", "slo_multiplier", "arrival_rate", "seeds",
                    "antt_mean", "antt_std", "violation_rate_mean", "violation_rate_std",
                    "stp_mean", "stp_std", "preemptions_mean", "preemptions_std"))
        for (sched, slo, rate), agg in cells:
            w.writerow([sched, _fmt(slo), _fmt(rate), agg["antt"].n]
                       + [_fmt(x) for name in ("antt", "violation_rate", "stp", "total_preemptions")
                          for x in (agg[name].mean, agg[name].std)])
