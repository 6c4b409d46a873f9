"""What a scheduler is allowed to see, and the scheduler base class."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .predictor import MonitorState
from .profile import ModelProfile, lookup
from .workload import ModelPatternKey, SampleTrace


class Trigger(str, enum.Enum):
    ARRIVAL = "arrival"  # dispatch onto an idle accelerator
    LAYER_COMPLETE = "layer_complete"


@dataclass(eq=False, slots=True)
class Job:
    """Scheduler-side view of a request: progress and observed sparsity, never the trace."""

    id: int
    key: ModelPatternKey
    arrival: float
    deadline: float
    num_layers: int
    next_layer: int = 0
    exec_accum: float = 0.0
    last_run_end: float = -1.0  # end of its latest block; < 0 until it first runs
    monitor: MonitorState = field(default_factory=MonitorState)

    @property
    def started(self) -> bool:
        return self.next_layer > 0

    def waited_total(self, now: float) -> float:
        return now - self.arrival - self.exec_accum

    def waited_since_run(self, now: float) -> float:
        return now - (self.last_run_end if self.last_run_end >= 0 else self.arrival)


class Scheduler:
    """Base policy. Subclasses override ``select`` and optionally the hooks.

    ``select`` receives every arrived, unfinished job (the one that just ran a
    block included) and the id of that job if it is still unfinished.
    """

    name = "base"
    preemptive = True
    needs_ground_truth = False

    def __init__(self):
        self.profiles: Mapping[ModelPatternKey, ModelProfile] = {}
        self.last_scores: dict[int, float] | None = None

    def bind(self, profiles: Mapping[ModelPatternKey, ModelProfile],
             ground_truth: Mapping[int, SampleTrace] | None = None) -> None:
        self.profiles = profiles

    def profile(self, job: Job) -> ModelProfile:
        return lookup(self.profiles, job.key)

    def admit(self, job: Job, now: float) -> None:
        pass

    def release(self, job: Job, now: float) -> None:
        pass

    def select(self, queue: Sequence[Job], now: float, running: int | None, trigger: Trigger) -> int:
        raise NotImplementedError


def argmin_with_ties(items, running: int | None) -> int:
    """items: iterable of (key, job_id). Minimum key wins; ties keep the running
    job if it is among the minima, else the lowest id."""
    best_key = None
    best: list[int] = []
    for key, jid in items:
        if best_key is None or key < best_key:
            best_key, best = key, [jid]
        elif key == best_key:
            best.append(jid)
    if not best:
        raise ValueError("empty queue")
    if running is not None and running in best:
        return running
    return min(best)
