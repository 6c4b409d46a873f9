"""Sparse latency prediction from monitored layer sparsity.

The sparsity coefficient is a density ratio: observed (1 - sparsity) over the
profiled average (1 - sparsity) on the same layers. Remaining latency is then
the profiled remaining latency scaled by alpha * gamma.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .profile import ModelProfile, lookup
from .workload import ModelPatternKey, SampleTrace

GAMMA_MIN = 0.05
GAMMA_MAX = 20.0
DEFAULT_LAST_N = 3


class CoeffKind(str, enum.Enum):
    AVERAGE_ALL = "average_all"
    LAST_N = "last_n"
    LAST_ONE = "last_one"


@dataclass(frozen=True)
class CoeffStrategy:
    kind: CoeffKind = CoeffKind.LAST_ONE
    n: int = DEFAULT_LAST_N

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("last-N window must be >= 1")

    @classmethod
    def average_all(cls) -> "CoeffStrategy":
        return cls(CoeffKind.AVERAGE_ALL)

    @classmethod
    def last_n(cls, n: int = DEFAULT_LAST_N) -> "CoeffStrategy":
        return cls(CoeffKind.LAST_N, n)

    @classmethod
    def last_one(cls) -> "CoeffStrategy":
        return cls(CoeffKind.LAST_ONE)

    @classmethod
    def parse(cls, name: str, n: int = DEFAULT_LAST_N) -> "CoeffStrategy":
        return cls(CoeffKind(name), n)

    @property
    def window(self) -> int | None:
        """How many most-recent layers feed the estimate (None = all)."""
        if self.kind is CoeffKind.LAST_ONE:
            return 1
        if self.kind is CoeffKind.LAST_N:
            return self.n
        return None

    def __str__(self) -> str:
        return f"last_n({self.n})" if self.kind is CoeffKind.LAST_N else self.kind.value


@dataclass
class MonitorState:
    """Observed layer sparsities of one request, oldest first.

    ``history`` keeps at most ``capacity`` values (None = unbounded) but
    ``count`` tracks every observed layer, so layer indices stay recoverable.
    """

    capacity: int | None = None
    history: deque = field(default_factory=deque)
    count: int = 0

    def __post_init__(self):
        if self.capacity is not None:
            self.history = deque(self.history, maxlen=self.capacity)

    def observed(self) -> list[float]:
        return list(self.history)


def monitor_update(state: MonitorState, layer) -> MonitorState:
    """Record one completed layer (a LayerTrace or a bare sparsity value)."""
    sparsity = getattr(layer, "sparsity", layer)
    if not 0.0 <= sparsity <= 1.0:
        raise ValueError(f"monitored sparsity {sparsity} outside [0, 1]")
    state.history.append(sparsity)
    state.count += 1
    return state


@dataclass(frozen=True)
class PredictorConfig:
    strategy: CoeffStrategy = CoeffStrategy()
    alpha: float = 1.0
    gamma_min: float = GAMMA_MIN
    gamma_max: float = GAMMA_MAX

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if not 0 < self.gamma_min <= 1.0 <= self.gamma_max:
            raise ValueError("gamma clamp must bracket 1")


def sparsity_coeff(monitor: MonitorState, profile: ModelProfile, strategy: CoeffStrategy,
                   gamma_min: float = GAMMA_MIN, gamma_max: float = GAMMA_MAX) -> tuple[float, bool]:
    """Return (gamma, clamped).

    The last observed layer index is ``monitor.count - 1``; the strategy picks
    which trailing layers are compared against the profile.
    """
    if monitor.count == 0:
        return 1.0, False
    window = strategy.window
    hist = monitor.history
    k = len(hist) if window is None else min(window, len(hist))
    if window is None and len(hist) < monitor.count:
        raise ValueError("average-all needs an unbounded monitor history")
    first = monitor.count - k
    obs = 0.0
    ref = 0.0
    for off in range(k):
        obs += 1.0 - hist[len(hist) - k + off]
        ref += 1.0 - profile.layer_avg_sparsity[first + off]
    if ref <= 0.0:
        return gamma_max, True
    gamma = obs / ref
    if gamma < gamma_min:
        return gamma_min, True
    if gamma > gamma_max:
        return gamma_max, True
    return gamma, False


def predict_remaining(profile: ModelProfile, gamma: float, next_layer: int, alpha: float = 1.0) -> float:
    if not 0 <= next_layer <= profile.num_layers:
        raise IndexError(f"next_layer {next_layer} outside 0..{profile.num_layers}")
    return alpha * gamma * profile.remaining_latency(next_layer)


def eval_rmse(traces: Iterable[SampleTrace], profiles: Mapping[ModelPatternKey, ModelProfile],
              strategy: CoeffStrategy, alpha: float = 1.0) -> float:
    """RMSE of remaining-latency prediction at every layer boundary.

    Both predicted and true remaining latency are divided by the profile's
    average total latency. Boundary j >= 1 uses layers < j as history;
    single-layer traces contribute their boundary 0 with gamma = 1.
    """
    sq = []
    for t in traces:
        prof = lookup(profiles, t.model_key)
        norm = prof.avg_total_latency
        L = t.num_layers
        if L == 1:
            err = (predict_remaining(prof, 1.0, 0, alpha) - t.suffix_latency[0]) / norm
            sq.append(err * err)
            continue
        mon = MonitorState()
        for j in range(1, L):
            monitor_update(mon, t.sparsities[j - 1])
            gamma, _ = sparsity_coeff(mon, prof, strategy)
            err = (predict_remaining(prof, gamma, j, alpha) - t.suffix_latency[j]) / norm
            sq.append(err * err)
    if not sq:
        raise ValueError("eval_rmse needs at least one trace")
    return math.sqrt(math.fsum(sq) / len(sq))
