"""Layer-granularity discrete-event engine for one time-shared accelerator.

The accelerator runs one block (``layer_block`` consecutive layers) of one
request at a time. At every block completion, and whenever arrivals hit an
idle accelerator, the scheduler picks the next request. Arrivals that land
exactly on a completion instant are enqueued after the completion and before
the decision.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .jobs import Job, Scheduler, Trigger
from .predictor import MonitorState, monitor_update
from .profile import ModelProfile, UnknownModelError
from .workload import ModelPatternKey, Request

log = logging.getLogger(__name__)

# Relative slack for float rounding when comparing turnaround to the SLO window.
VIOLATION_RTOL = 1e-9


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    layer_block: int = 1
    context_switch_s: float = 0.0
    max_queue: int | None = None
    overflow: str = "error"  # or "drop"
    max_time_s: float = 1e9
    monitor_capacity: int | None = None

    def __post_init__(self):
        if self.layer_block < 1:
            raise ValueError("layer_block must be >= 1")
        if self.context_switch_s < 0:
            raise ValueError("context_switch_s must be >= 0")
        if self.overflow not in ("error", "drop"):
            raise ValueError("overflow must be 'error' or 'drop'")
        if self.max_queue is not None and self.max_queue < 1:
            raise ValueError("max_queue must be >= 1")


@dataclass(frozen=True)
class SimClock:
    now: float = 0.0

    def advance(self, t: float) -> "SimClock":
        if t < self.now:
            raise SimulationError(f"clock moved backwards: {t} < {self.now}")
        return SimClock(t)


@dataclass(frozen=True)
class ScheduleEvent:
    kind: Trigger
    time: float
    request_id: int


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    first_layer: int
    end_layer: int  # exclusive


@dataclass
class RunRecord:
    id: int
    key: ModelPatternKey
    arrival: float
    deadline: float
    t_isol: float
    completion: float | None = None
    preemptions: int = 0
    segments: list[Segment] = field(default_factory=list)
    dropped: bool = False

    @property
    def turnaround(self) -> float:
        if self.completion is None:
            return math.inf
        # Sequential clock additions can undershoot the fsum'd isolated time by an ulp.
        return max(self.completion - self.arrival, self.t_isol)

    @property
    def slo_window(self) -> float:
        return self.deadline - self.arrival

    @property
    def slo_multiplier(self) -> float:
        return self.slo_window / self.t_isol

    @property
    def violated(self) -> bool:
        if self.dropped:
            return True
        return self.turnaround - self.slo_window > VIOLATION_RTOL * self.slo_window

    @property
    def normalized_turnaround(self) -> float:
        return self.turnaround / self.t_isol


@dataclass
class EventLogRow:
    time: float
    kind: str
    request_id: int
    layer_idx: int
    score: float | None


def run_sim(requests: Sequence[Request], profiles: Mapping[ModelPatternKey, ModelProfile],
            scheduler: Scheduler, config: SimConfig = SimConfig(),
            event_log: list[EventLogRow] | None = None) -> list[RunRecord]:
    """Replay ``requests`` under ``scheduler``; input requests are not mutated."""
    for r in requests:
        if r.key not in profiles:
            raise UnknownModelError(r.key)
    reqs = sorted((r.fresh_copy() for r in requests), key=lambda r: (r.arrival, r.id))
    if len({r.id for r in reqs}) != len(reqs):
        raise SimulationError("duplicate request ids")

    ground_truth = {r.id: r.trace for r in reqs} if scheduler.needs_ground_truth else None
    scheduler.bind(profiles, ground_truth)

    records = {r.id: RunRecord(r.id, r.key, r.arrival, r.deadline, r.trace.total_latency) for r in reqs}
    by_id = {r.id: r for r in reqs}
    queue: dict[int, Job] = {}
    n = len(reqs)
    nxt = 0
    finished = 0
    now = 0.0
    prev: Job | None = None
    block = config.layer_block
    cap = config.max_queue

    def admit(r: Request) -> None:
        nonlocal finished
        if cap is not None and len(queue) >= cap:
            if config.overflow == "error":
                raise SimulationError(f"queue length exceeds max_queue={cap} at t={r.arrival}")
            records[r.id].dropped = True
            finished += 1
            return
        job = Job(r.id, r.key, r.arrival, r.deadline, r.trace.num_layers,
                  monitor=MonitorState(config.monitor_capacity))
        queue[r.id] = job
        scheduler.admit(job, r.arrival)

    while finished < n:
        if not queue:
            now = max(now, reqs[nxt].arrival)
            while nxt < n and reqs[nxt].arrival <= now:
                admit(reqs[nxt])
                nxt += 1
            trigger = Trigger.ARRIVAL
            prev = None
            if not queue:  # everything just dropped
                continue
        else:
            trigger = Trigger.LAYER_COMPLETE
        if now > config.max_time_s:
            raise SimulationError(f"simulated time exceeded max_time_s={config.max_time_s}")

        jobs = list(queue.values())
        pick = scheduler.select(jobs, now, prev.id if prev is not None else None, trigger)
        job = queue[pick]
        if event_log is not None:
            _log_decision(event_log, now, trigger, jobs, scheduler.last_scores, job)

        if prev is not None and pick != prev.id:
            by_id[prev.id].preempt_count += 1
            records[prev.id].preemptions += 1
            now += config.context_switch_s

        req = by_id[pick]
        lat = req.trace.latencies
        start = now
        first = job.next_layer
        stop = min(first + block, job.num_layers)
        end = start
        for j in range(first, stop):
            end += lat[j]
        # Arrivals strictly inside the block wait for its boundary.
        while nxt < n and reqs[nxt].arrival < end:
            admit(reqs[nxt])
            nxt += 1
        now = end
        sp = req.trace.sparsities
        for j in range(first, stop):
            job.exec_accum += lat[j]
            monitor_update(job.monitor, sp[j])
        job.next_layer = req.next_layer = stop
        job.last_run_end = end
        req.exec_accum = job.exec_accum
        records[pick].segments.append(Segment(start, end, first, stop))

        if stop == job.num_layers:
            req.completion = now
            records[pick].completion = now
            del queue[pick]
            scheduler.release(job, now)
            finished += 1
            prev = None
        else:
            prev = job
        while nxt < n and reqs[nxt].arrival <= now:
            admit(reqs[nxt])
            nxt += 1

    return [records[r.id] for r in reqs]


def _log_decision(out: list[EventLogRow], now: float, trigger: Trigger, jobs: Iterable[Job],
                  scores: dict[int, float] | None, chosen: Job) -> None:
    for j in jobs:
        s = scores.get(j.id) if scores else None
        out.append(EventLogRow(now, trigger.value, j.id, j.next_layer, s))
    out.append(EventLogRow(now, "dispatch", chosen.id, chosen.next_layer,
                           scores.get(chosen.id) if scores else None))


def write_event_log(rows: Iterable[EventLogRow], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("time", "kind", "request_id", "layer_idx", "score"))
        for r in rows:
            w.writerow((repr(r.time), r.kind, r.request_id, r.layer_idx,
                        "" if r.score is None else repr(r.score)))


@dataclass(frozen=True)
class PreemptionSummary:
    total: int
    per_request: dict[int, int]


def preemption_accounting(records: Iterable[RunRecord]) -> PreemptionSummary:
    per = {r.id: r.preemptions for r in records}
    return PreemptionSummary(sum(per.values()), per)
