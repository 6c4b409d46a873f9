"""The bi-level Dysta scheduler.

Admission assigns a static score from the profiled average latency and the
SLO window. At every layer boundary all queued requests are re-scored from
their sparsity-corrected remaining latency, their slack and a wait-based
penalty; the lowest score runs next.

Scores are expressed in ``time_unit_s`` units (milliseconds by default). The
penalty is a plain ratio, so the unit decides how much it weighs against the
time terms.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .jobs import Job, Scheduler, Trigger
from .predictor import PredictorConfig, predict_remaining, sparsity_coeff
from .profile import ModelProfile, lookup
from .workload import ModelPatternKey, Request

FP16_MAX = float(np.finfo(np.float16).max)


class Precision(str, enum.Enum):
    FULL = "full"
    HALF = "half"


@dataclass(frozen=True)
class DystaConfig:
    beta: float = 0.5
    eta: float = 0.5
    predictor: PredictorConfig = PredictorConfig()
    score_precision: Precision = Precision.FULL
    # +1 adds the penalty as written, -1 subtracts it, 0 disables it.
    penalty_sign: float = 1.0
    # False pins gamma to 1 (profile averages only).
    sparsity_aware: bool = True
    # "window": slack = SLO window - remaining (the "- now" term is common to
    # every queued request and dropped); "deadline": deadline - now - remaining.
    slack_mode: str = "window"
    # "since_run": wait since the request's latest block (or arrival);
    # "total": all waiting since arrival.
    wait_mode: str = "since_run"
    # Seconds per score unit.
    time_unit_s: float = 1e-3

    def __post_init__(self):
        for name in ("beta", "eta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if self.penalty_sign not in (-1.0, 0.0, 1.0):
            raise ValueError("penalty_sign must be -1, 0 or 1")
        if self.slack_mode not in ("window", "deadline"):
            raise ValueError("slack_mode must be 'window' or 'deadline'")
        if self.wait_mode not in ("since_run", "total"):
            raise ValueError("wait_mode must be 'since_run' or 'total'")
        if not (math.isfinite(self.time_unit_s) and self.time_unit_s > 0):
            raise ValueError("time_unit_s must be finite and > 0")


@dataclass(frozen=True)
class ScoredRequest:
    id: int
    score: float
    remaining_est: float
    slack: float
    penalty: float = 0.0
    gamma: float = 1.0


def quantize_score(score: float, precision: Precision = Precision.FULL) -> float:
    """Round to binary16 (nearest-even) in HALF mode, saturating at the format's max."""
    if precision is Precision.FULL:
        return score
    if score >= FP16_MAX:
        return FP16_MAX
    if score <= -FP16_MAX:
        return -FP16_MAX
    q = float(np.float16(score))
    if math.isinf(q):
        return math.copysign(FP16_MAX, q)
    return q


def static_score(request: Request | Job, profile: ModelProfile, config: DystaConfig) -> ScoredRequest:
    if profile.key != request.key:
        raise ValueError(f"profile {profile.key} does not match request key {request.key}")
    lat = profile.avg_total_latency
    slack = (request.deadline - request.arrival) - lat
    score = quantize_score((lat + config.beta * slack) / config.time_unit_s, config.score_precision)
    return ScoredRequest(request.id, score, lat, slack)


# (gamma, remaining estimate, isolated-latency estimate) for one job.
Estimate = tuple[float, float, float]


def sparse_estimate(job: Job, profile: ModelProfile, config: DystaConfig) -> Estimate:
    pc = config.predictor
    if config.sparsity_aware:
        gamma, _ = sparsity_coeff(job.monitor, profile, pc.strategy, pc.gamma_min, pc.gamma_max)
    else:
        gamma = 1.0
    rem = predict_remaining(profile, gamma, job.next_layer, pc.alpha)
    return gamma, rem, pc.alpha * gamma * profile.avg_total_latency


def dynamic_score_all(queue: Sequence[Job], now: float,
                      profiles: Mapping[ModelPatternKey, ModelProfile], config: DystaConfig,
                      estimate: Callable[[Job], Estimate] | None = None) -> list[ScoredRequest]:
    """Re-score every queued job at time ``now``.

    remaining = alpha * gamma * profiled remaining latency
    slack     = SLO window - remaining     (or deadline - now - remaining)
    penalty   = (waited / estimated isolated latency) / |queue|
    score     = remaining + eta * (slack + penalty)

    The request that just ran has waited 0 under the default wait mode, so a
    positive penalty only ever favours keeping it on the accelerator.
    """
    if not queue:
        return []
    if estimate is None:
        def estimate(job: Job) -> Estimate:
            return sparse_estimate(job, lookup(profiles, job.key), config)
    n = len(queue)
    eta = config.eta
    sign = config.penalty_sign
    prec = config.score_precision
    unit = config.time_unit_s
    window = config.slack_mode == "window"
    since_run = config.wait_mode == "since_run"
    out = []
    for job in queue:
        gamma, rem, isol = estimate(job)
        if window:
            slack = (job.deadline - job.arrival) - rem
        else:
            slack = job.deadline - now - rem
        waited = job.waited_since_run(now) if since_run else job.waited_total(now)
        penalty = (waited / isol) / n if sign else 0.0
        score = (rem + eta * slack) / unit + eta * sign * penalty
        out.append(ScoredRequest(job.id, quantize_score(score, prec), rem, slack, penalty, gamma))
    return out


def select_next(scored: Sequence[ScoredRequest], running: int | None = None) -> int | None:
    """Lowest score wins; ties keep the running request, else the lowest id."""
    if not scored:
        return None
    best = min(s.score for s in scored)
    ties = [s.id for s in scored if s.score == best]
    if running is not None and running in ties:
        return running
    return min(ties)


class DystaScheduler(Scheduler):
    name = "dysta"

    def __init__(self, config: DystaConfig = DystaConfig()):
        super().__init__()
        self.config = config
        self.static: dict[int, ScoredRequest] = {}
        self._cache: dict[int, tuple[int, Estimate]] = {}
        self.last_scored: list[ScoredRequest] = []

    def admit(self, job: Job, now: float) -> None:
        self.static[job.id] = static_score(job, self.profile(job), self.config)

    def release(self, job: Job, now: float) -> None:
        self.static.pop(job.id, None)
        self._cache.pop(job.id, None)

    def estimate(self, job: Job) -> Estimate:
        hit = self._cache.get(job.id)
        if hit is not None and hit[0] == job.next_layer:
            return hit[1]
        est = sparse_estimate(job, self.profile(job), self.config)
        self._cache[job.id] = (job.next_layer, est)
        return est

    def score(self, queue: Sequence[Job], now: float, trigger: Trigger) -> list[ScoredRequest]:
        if trigger is Trigger.ARRIVAL:
            return [self.static[j.id] for j in queue]
        return dynamic_score_all(queue, now, self.profiles, self.config, self.estimate)

    def select(self, queue, now, running, trigger):
        scored = self.score(queue, now, trigger)
        self.last_scored = scored
        self.last_scores = {s.id: s.score for s in scored}
        return select_next(scored, running)


class DystaStaticScheduler(DystaScheduler):
    """Ablation: admission-time static scores only, no runtime refinement."""

    name = "dysta_static_only"

    def score(self, queue, now, trigger):
        return [self.static[j.id] for j in queue]
