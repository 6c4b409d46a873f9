"""Per (model, pattern) latency and sparsity lookup tables."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .workload import (TRACE_COLUMNS, LayerTrace, ModelPatternKey, SampleTrace, TraceError,
                       group_by_key, load_traces)

PROFILE_SAMPLE_ID = "avg"


class UnknownModelError(KeyError):
    """A request refers to a (model, pattern) pair with no profile."""

    def __str__(self) -> str:
        return f"no profile for model/pattern {self.args[0]}"


@dataclass(frozen=True)
class ModelProfile:
    key: ModelPatternKey
    layer_avg_latency: tuple[float, ...]
    layer_avg_sparsity: tuple[float, ...]

    def __post_init__(self):
        if len(self.layer_avg_latency) != len(self.layer_avg_sparsity):
            raise ValueError(f"{self.key}: latency and sparsity tables differ in length")
        if not self.layer_avg_latency:
            raise ValueError(f"{self.key}: empty profile")
        # Suffix sums make remaining-latency lookups O(1).
        suffix = [0.0] * (len(self.layer_avg_latency) + 1)
        for j in range(len(self.layer_avg_latency) - 1, -1, -1):
            suffix[j] = suffix[j + 1] + self.layer_avg_latency[j]
        object.__setattr__(self, "_suffix", tuple(suffix))

    @property
    def num_layers(self) -> int:
        return len(self.layer_avg_latency)

    @property
    def avg_total_latency(self) -> float:
        return math.fsum(self.layer_avg_latency)

    def remaining_latency(self, next_layer: int) -> float:
        """Average latency of layers next_layer..L-1."""
        return self._suffix[next_layer]

    def avg_density(self, j: int) -> float:
        return 1.0 - self.layer_avg_sparsity[j]

    def scaled(self, factor: float) -> "ModelProfile":
        return ModelProfile(self.key, tuple(x * factor for x in self.layer_avg_latency),
                            self.layer_avg_sparsity)

    def as_trace(self) -> SampleTrace:
        layers = tuple(LayerTrace(l, s) for l, s in zip(self.layer_avg_latency, self.layer_avg_sparsity))
        return SampleTrace(self.key, layers, PROFILE_SAMPLE_ID)


class ProfileStore(Mapping[ModelPatternKey, ModelProfile]):
    """Immutable mapping from model-pattern key to its profile."""

    def __init__(self, profiles: Iterable[ModelProfile] = ()):
        self._by_key: dict[ModelPatternKey, ModelProfile] = {}
        for p in profiles:
            if p.key in self._by_key:
                raise ValueError(f"duplicate profile for {p.key}")
            self._by_key[p.key] = p

    def __getitem__(self, key: ModelPatternKey) -> ModelProfile:
        try:
            return self._by_key[key]
        except KeyError:
            raise UnknownModelError(key) from None

    def __iter__(self) -> Iterator[ModelPatternKey]:
        return iter(self._by_key)

    def __len__(self) -> int:
        return len(self._by_key)

    def __repr__(self) -> str:
        return f"ProfileStore({sorted(map(str, self._by_key))})"

    def scaled(self, factor: float) -> "ProfileStore":
        return ProfileStore(p.scaled(factor) for p in self.values())


def build_profiles(traces: Iterable[SampleTrace]) -> ProfileStore:
    """Per-key, per-layer arithmetic means of latency and sparsity."""
    groups = group_by_key(traces)
    if not groups:
        raise ValueError("cannot build profiles from an empty trace list")
    profiles = []
    for key, samples in groups.items():
        n_layers = {t.num_layers for t in samples}
        if len(n_layers) != 1:
            raise ValueError(f"{key}: traces disagree on layer count {sorted(n_layers)}")
        L = n_layers.pop()
        n = len(samples)
        # fsum over a sorted column keeps the result independent of input order.
        lat = tuple(math.fsum(sorted(t.latencies[j] for t in samples)) / n for j in range(L))
        sp = tuple(math.fsum(sorted(t.sparsities[j] for t in samples)) / n for j in range(L))
        profiles.append(ModelProfile(key, lat, sp))
    return ProfileStore(profiles)


def lookup(store: Mapping[ModelPatternKey, ModelProfile], key: ModelPatternKey) -> ModelProfile:
    try:
        return store[key]
    except KeyError:
        raise UnknownModelError(key) from None


def write_profiles(store: ProfileStore, path: str | Path) -> None:
    """Export in the trace CSV layout with sample_id fixed to ``avg``."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for key in sorted(store):
            p = store[key]
            for j, (lat, sp) in enumerate(zip(p.layer_avg_latency, p.layer_avg_sparsity)):
                w.writerow((key.model_name, key.pattern.value, PROFILE_SAMPLE_ID, j, repr(lat), repr(sp)))


def load_profiles(path: str | Path) -> ProfileStore:
    traces = load_traces(path)
    bad = [t for t in traces if t.sample_id != PROFILE_SAMPLE_ID]
    if bad:
        raise TraceError(f"{path}: profile rows must use sample_id {PROFILE_SAMPLE_ID!r}")
    return ProfileStore(ModelProfile(t.model_key, t.latencies, t.sparsities) for t in traces)
