"""Reference scheduling policies, all preemptive only at layer boundaries.

See BASELINES.md for how PREMA, Planaria and SDRM3 are adapted to a single
time-shared accelerator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .dysta import DystaConfig, DystaScheduler, DystaStaticScheduler, Estimate, dynamic_score_all
from .jobs import Job, Scheduler, Trigger, argmin_with_ties
from .profile import ModelProfile
from .workload import ModelPatternKey, SampleTrace


def fcfs_select(queue: Sequence[Job], now: float, running: int | None = None) -> int:
    if running is not None and any(j.id == running for j in queue):
        return running
    return min(queue, key=lambda j: (j.arrival, j.id)).id


def sjf_select(queue: Sequence[Job], now: float, profiles: Mapping[ModelPatternKey, ModelProfile],
               running: int | None = None) -> int:
    """Shortest profiled (sparsity-blind) remaining latency first."""
    return argmin_with_ties(((profiles[j.key].remaining_latency(j.next_layer), j.id) for j in queue), running)


def planaria_select(queue: Sequence[Job], now: float, profiles: Mapping[ModelPatternKey, ModelProfile],
                    running: int | None = None) -> int:
    """Earliest deadline first; equal deadlines go to the shorter estimated remainder."""
    return argmin_with_ties(
        (((j.deadline, profiles[j.key].remaining_latency(j.next_layer)), j.id) for j in queue), running)


class FCFSScheduler(Scheduler):
    name = "fcfs"
    preemptive = False

    def select(self, queue, now, running, trigger):
        return fcfs_select(queue, now, running)


class SJFScheduler(Scheduler):
    name = "sjf"

    def select(self, queue, now, running, trigger):
        self.last_scores = {j.id: self.profile(j).remaining_latency(j.next_layer) for j in queue}
        return argmin_with_ties(((s, i) for i, s in self.last_scores.items()), running)


class PlanariaScheduler(Scheduler):
    name = "planaria"

    def select(self, queue, now, running, trigger):
        return planaria_select(queue, now, self.profiles, running)


@dataclass
class PremaState:
    priorities: dict[int, int] = field(default_factory=dict)
    tokens: dict[int, float] = field(default_factory=dict)
    last_seen: dict[int, float] = field(default_factory=dict)

    def threshold(self, queue: Sequence[Job]) -> float:
        return float(max(self.priorities[j.id] for j in queue))


def prema_select(state: PremaState, queue: Sequence[Job], now: float,
                 profiles: Mapping[ModelPatternKey, ModelProfile], running: int | None = None) -> int:
    """Token-gated shortest-remaining-job selection (mutates ``state``).

    Waiting jobs earn ``priority * waited / estimated isolated latency`` tokens
    since their last update; jobs with tokens >= the highest queued priority
    are candidates; the shortest estimated remainder among them runs and its
    tokens reset to its priority.
    """
    for j in queue:
        if j.id != running:
            iso = profiles[j.key].avg_total_latency
            state.tokens[j.id] += state.priorities[j.id] * (now - state.last_seen[j.id]) / iso
        state.last_seen[j.id] = now
    thr = state.threshold(queue)
    cands = [j for j in queue if state.tokens[j.id] >= thr]
    pick = argmin_with_ties(((profiles[j.key].remaining_latency(j.next_layer), j.id) for j in cands), running)
    if pick != running:
        state.tokens[pick] = float(state.priorities[pick])
    return pick


class PremaScheduler(Scheduler):
    name = "prema"

    def __init__(self, priorities: Mapping[int, int] | None = None, default_priority: int = 1):
        super().__init__()
        self.fixed = dict(priorities or {})
        self.default_priority = default_priority
        self.state = PremaState()

    def admit(self, job, now):
        p = int(self.fixed.get(job.id, self.default_priority))
        if p < 1:
            raise ValueError("PREMA priorities must be positive integers")
        self.state.priorities[job.id] = p
        self.state.tokens[job.id] = float(p)
        self.state.last_seen[job.id] = now

    def release(self, job, now):
        for d in (self.state.priorities, self.state.tokens, self.state.last_seen):
            d.pop(job.id, None)

    def select(self, queue, now, running, trigger):
        pick = prema_select(self.state, queue, now, self.profiles, running)
        self.last_scores = {j.id: self.state.tokens[j.id] for j in queue}
        return pick


@dataclass(frozen=True)
class Sdrm3Config:
    alpha_weight: float = 0.5
    pref: float = 1.0
    slack_floor: float = 1e-6

    def __post_init__(self):
        if not 0.0 <= self.alpha_weight <= 1.0:
            raise ValueError("alpha_weight must lie in [0, 1]")
        if self.pref != 1.0:
            raise ValueError("pref is fixed at 1 on a single accelerator")


def _minmax(values: list[float]) -> list[float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.0] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def sdrm3_scores(queue: Sequence[Job], now: float, profiles: Mapping[ModelPatternKey, ModelProfile],
                 cfg: Sdrm3Config) -> dict[int, float]:
    """MapScore = a * Urgency + (1 - a) * Fairness, both min-max normalised over the queue.

    Urgency is 1 / slack (slack floored at ``slack_floor`` so late jobs rank
    most urgent); Fairness is waited time over profiled isolated latency.
    """
    urg, fair = [], []
    for j in queue:
        prof = profiles[j.key]
        slack = j.deadline - now - prof.remaining_latency(j.next_layer)
        urg.append(1.0 / max(slack, cfg.slack_floor))
        fair.append((now - j.arrival - j.exec_accum) / prof.avg_total_latency)
    a = cfg.alpha_weight
    return {j.id: cfg.pref * (a * u + (1.0 - a) * f)
            for j, u, f in zip(queue, _minmax(urg), _minmax(fair))}


def sdrm3_select(queue: Sequence[Job], now: float, profiles: Mapping[ModelPatternKey, ModelProfile],
                 cfg: Sdrm3Config = Sdrm3Config(), running: int | None = None) -> int:
    scores = sdrm3_scores(queue, now, profiles, cfg)
    return argmin_with_ties(((-s, i) for i, s in scores.items()), running)


class Sdrm3Scheduler(Scheduler):
    name = "sdrm3"

    def __init__(self, cfg: Sdrm3Config = Sdrm3Config()):
        super().__init__()
        self.cfg = cfg

    def select(self, queue, now, running, trigger):
        self.last_scores = sdrm3_scores(queue, now, self.profiles, self.cfg)
        return argmin_with_ties(((-s, i) for i, s in self.last_scores.items()), running)


class OracleScheduler(DystaScheduler):
    """Dysta's dynamic scoring with the true remaining and isolated latency."""

    name = "oracle"
    needs_ground_truth = True

    def bind(self, profiles, ground_truth=None):
        super().bind(profiles, ground_truth)
        if ground_truth is None:
            raise ValueError("oracle scheduler needs ground-truth traces")
        self.truth: Mapping[int, SampleTrace] = ground_truth

    def estimate(self, job: Job) -> Estimate:
        t = self.truth[job.id]
        return 1.0, t.suffix_latency[job.next_layer], t.total_latency

    def score(self, queue, now, trigger):
        # Perfect knowledge makes the admission-time estimate exact too.
        return dynamic_score_all(queue, now, self.profiles, self.config, self.estimate)


def oracle_select(queue: Sequence[Job], now: float, truth: Mapping[int, SampleTrace],
                  config: DystaConfig = DystaConfig(), running: int | None = None) -> int:
    sched = OracleScheduler(config)
    sched.bind({}, truth)
    return sched.select(queue, now, running, Trigger.LAYER_COMPLETE)


SCHEDULERS = ("fcfs", "sjf", "prema", "planaria", "sdrm3", "oracle", "dysta", "dysta_static_only")


def make_scheduler(name: str, dysta: DystaConfig = DystaConfig(), sdrm3: Sdrm3Config = Sdrm3Config(),
                   prema_priorities: Mapping[int, int] | None = None,
                   prema_default_priority: int = 1) -> Scheduler:
    if name == "fcfs":
        return FCFSScheduler()
    if name == "sjf":
        return SJFScheduler()
    if name == "prema":
        return PremaScheduler(prema_priorities, prema_default_priority)
    if name == "planaria":
        return PlanariaScheduler()
    if name == "sdrm3":
        return Sdrm3Scheduler(sdrm3)
    if name == "oracle":
        return OracleScheduler(dysta)
    if name == "dysta":
        return DystaScheduler(dysta)
    if name == "dysta_static_only":
        return DystaStaticScheduler(dysta)
    raise ValueError(f"unknown scheduler {name!r}; choose from {', '.join(SCHEDULERS)}")
