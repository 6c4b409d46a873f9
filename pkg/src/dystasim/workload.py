"""Traces, requests and workload generation.

A trace is the ground-truth per-layer (latency, sparsity) record of one
model/input execution. Requests pair a trace with an arrival time and an
absolute deadline; the simulator replays the trace layer by layer.
"""
from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from itertools import groupby
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("model_name", "pattern", "sample_id", "layer_idx", "latency_s", "sparsity")
REQUEST_COLUMNS = ("request_id", "model_name", "pattern", "sample_id", "arrival_s", "deadline_s")

# Sub-stream ids for SeedSequence.spawn_key; never renumber existing entries.
_STREAMS = {"arrivals": 1, "trace_choice": 2, "synth": 3, "synth_profile": 4}


class TraceError(ValueError):
    """Malformed or invalid trace input."""


class Pattern(str, enum.Enum):
    DENSE = "dense"
    POINTWISE_RANDOM = "pointwise_random"
    BLOCK_NM = "block_nm"
    CHANNELWISE = "channelwise"
    DYNAMIC_ATTENTION = "dynamic_attention"

    @classmethod
    def parse(cls, text: str) -> "Pattern":
        norm = text.strip().lower().replace("-", "_").replace(":", "_")
        try:
            return cls(norm)
        except ValueError:
            raise TraceError(f"unknown sparsity pattern {text!r}") from None


@dataclass(frozen=True, order=True)
class ModelPatternKey:
    model_name: str
    pattern: Pattern

    def __str__(self) -> str:
        return f"{self.model_name}/{self.pattern.value}"


@dataclass(frozen=True, slots=True)
class LayerTrace:
    latency: float
    sparsity: float

    def __post_init__(self):
        if not (self.latency >= 0.0 and math.isfinite(self.latency)):
            raise TraceError(f"layer latency must be finite and >= 0, got {self.latency}")
        if not 0.0 <= self.sparsity <= 1.0:
            raise TraceError(f"layer sparsity must lie in [0, 1], got {self.sparsity}")

    @property
    def density(self) -> float:
        return 1.0 - self.sparsity


@dataclass(frozen=True)
class SampleTrace:
    model_key: ModelPatternKey
    layers: tuple[LayerTrace, ...]
    sample_id: str = "0"

    def __post_init__(self):
        if not self.layers:
            raise TraceError(f"trace {self.model_key}#{self.sample_id} has no layers")
        if not self.total_latency > 0.0:
            raise TraceError(f"trace {self.model_key}#{self.sample_id} has zero total latency")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @cached_property
    def latencies(self) -> tuple[float, ...]:
        return tuple(l.latency for l in self.layers)

    @cached_property
    def sparsities(self) -> tuple[float, ...]:
        return tuple(l.sparsity for l in self.layers)

    @cached_property
    def total_latency(self) -> float:
        """Isolated execution time, the plain sum of layer latencies."""
        return math.fsum(l.latency for l in self.layers)

    @cached_property
    def suffix_latency(self) -> tuple[float, ...]:
        """suffix_latency[j] is the true latency of layers j..L-1 (length L+1)."""
        out = [0.0] * (self.num_layers + 1)
        for j in range(self.num_layers - 1, -1, -1):
            out[j] = out[j + 1] + self.layers[j].latency
        return tuple(out)

    def scaled(self, factor: float) -> "SampleTrace":
        layers = tuple(LayerTrace(l.latency * factor, l.sparsity) for l in self.layers)
        return SampleTrace(self.model_key, layers, self.sample_id)


@dataclass(eq=False)
class Request:
    """One inference job. Execution progress fields are mutated by the engine."""

    id: int
    key: ModelPatternKey
    arrival: float
    trace: SampleTrace
    deadline: float = math.inf
    slo_multiplier: float = math.inf
    next_layer: int = 0
    exec_accum: float = 0.0
    completion: float | None = None
    preempt_count: int = 0

    @property
    def isolated_latency(self) -> float:
        return self.trace.total_latency

    @property
    def finished(self) -> bool:
        return self.next_layer >= self.trace.num_layers

    def fresh_copy(self) -> "Request":
        """Same job with execution state reset, so one workload can feed many runs."""
        return Request(self.id, self.key, self.arrival, self.trace, self.deadline, self.slo_multiplier)

    def as_row(self) -> tuple:
        return (self.id, self.key.model_name, self.key.pattern.value, self.trace.sample_id,
                repr(self.arrival), repr(self.deadline))


@dataclass(frozen=True)
class WorkloadSpec:
    trace_pool: Sequence[SampleTrace]
    arrival_rate: float
    num_requests: int
    slo_multiplier: float
    seed: int = 0

    def __post_init__(self):
        if self.num_requests < 1:
            raise ValueError("num_requests must be >= 1")
        if not self.arrival_rate > 0:
            raise ValueError("arrival_rate must be > 0")
        if not self.trace_pool:
            raise ValueError("trace_pool must be non-empty")


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic (model, pattern) trace family.

    ``base_latency`` is the dense per-layer latency; each layer's latency is
    ``base * ((1 - alpha_synth) + alpha_synth * density)``. Per-layer mean
    sparsities are spread around ``mean_sparsity`` by ``layer_spread`` (relative).
    Per-sample sparsity deviations are a shared per-sample draw mixed with
    independent per-layer draws so that any two layers correlate at ``correlation``.
    """

    model_name: str
    pattern: Pattern = Pattern.DENSE
    num_layers: int = 12
    base_latency: float | tuple[float, ...] = 1e-3
    mean_sparsity: float = 0.3
    rel_range: float = 0.28
    correlation: float = 0.9
    alpha_synth: float = 1.0
    num_samples: int = 100
    layer_spread: float = 0.0

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if not 0.0 <= self.correlation <= 1.0:
            raise ValueError(f"correlation must lie in [0, 1], got {self.correlation}")
        if not 0.0 <= self.mean_sparsity < 1.0:
            raise ValueError(f"mean_sparsity must lie in [0, 1), got {self.mean_sparsity}")
        if self.rel_range < 0.0 or self.layer_spread < 0.0:
            raise ValueError("rel_range and layer_spread must be >= 0")
        if not 0.0 <= self.alpha_synth <= 1.0:
            raise ValueError("alpha_synth must lie in [0, 1]")
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if isinstance(self.base_latency, tuple) and len(self.base_latency) != self.num_layers:
            raise ValueError("per-layer base_latency must have num_layers entries")

    @property
    def key(self) -> ModelPatternKey:
        return ModelPatternKey(self.model_name, self.pattern)

    def base_latencies(self) -> np.ndarray:
        if isinstance(self.base_latency, tuple):
            return np.asarray(self.base_latency, dtype=float)
        return np.full(self.num_layers, float(self.base_latency))


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent named RNG stream derived from a workload seed."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(_STREAMS[name], *extra))
    return np.random.default_rng(ss)


def _parse_float(text: str, what: str, lineno: int) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise TraceError(f"line {lineno}: cannot parse {what} {text!r}") from None
    if not math.isfinite(value):
        raise TraceError(f"line {lineno}: {what} must be finite")
    return value


def load_traces(path: str | Path) -> list[SampleTrace]:
    """Read the per-layer trace CSV; one SampleTrace per (model, pattern, sample)."""
    path = Path(path)
    groups: dict[tuple[str, Pattern, str], list[tuple[int, LayerTrace, int]]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TraceError(f"{path}: empty trace file")
        header = [h.strip() for h in header]
        missing = [c for c in TRACE_COLUMNS if c not in header]
        if missing:
            raise TraceError(f"{path}: line 1: header is missing columns {missing}")
        col = {name: header.index(name) for name in TRACE_COLUMNS}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise TraceError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                pattern = Pattern.parse(row[col["pattern"]])
                layer_idx = int(row[col["layer_idx"]])
            except (TraceError, ValueError) as exc:
                raise TraceError(f"{path}: line {lineno}: {exc}") from None
            lat = _parse_float(row[col["latency_s"]], "latency_s", lineno)
            sp = _parse_float(row[col["sparsity"]], "sparsity", lineno)
            try:
                layer = LayerTrace(lat, sp)
            except TraceError as exc:
                raise TraceError(f"{path}: line {lineno}: {exc}") from None
            gkey = (row[col["model_name"]].strip(), pattern, row[col["sample_id"]].strip())
            groups.setdefault(gkey, []).append((layer_idx, layer, lineno))
    if not groups:
        raise TraceError(f"{path}: trace file has no data rows")

    traces = []
    for (model, pattern, sample), rows in groups.items():
        for expect, (idx, _, lineno) in enumerate(rows):
            if idx != expect:
                raise TraceError(
                    f"{path}: line {lineno}: layer_idx {idx} out of order for "
                    f"{model}/{pattern.value}#{sample} (expected {expect})")
        traces.append(SampleTrace(ModelPatternKey(model, pattern), tuple(r[1] for r in rows), sample))
    return traces


def write_traces(traces: Iterable[SampleTrace], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for t in traces:
            for j, layer in enumerate(t.layers):
                w.writerow((t.model_key.model_name, t.model_key.pattern.value, t.sample_id, j,
                            repr(layer.latency), repr(layer.sparsity)))


def synth_traces(spec: SynthSpec, seed: int) -> list[SampleTrace]:
    """Generate ``spec.num_samples`` correlated synthetic traces, deterministic in ``seed``.

    Each layer's sparsity is ``m_l * (1 + rel_range * u)`` where ``u`` mixes a
    per-sample uniform draw (weight sqrt(c)) with a per-layer one (weight
    sqrt(1 - c)). Both draws are U(-1/2, 1/2), so the per-sample network sparsity
    spans ``rel_range`` of its mean when ``c = 1``.
    """
    L = spec.num_layers
    prof_rng = substream(seed, "synth_profile", _name_hash(spec.model_name))
    spread = prof_rng.uniform(-0.5, 0.5, L) * spec.layer_spread
    layer_mean = np.clip(spec.mean_sparsity * (1.0 + spread), 0.0, 1.0)

    rng = substream(seed, "synth", _name_hash(spec.model_name), _name_hash(spec.pattern.value))
    shared = rng.uniform(-0.5, 0.5, (spec.num_samples, 1))
    own = rng.uniform(-0.5, 0.5, (spec.num_samples, L))
    c = spec.correlation
    u = math.sqrt(c) * shared + math.sqrt(1.0 - c) * own
    sparsity = np.clip(layer_mean * (1.0 + spec.rel_range * u), 0.0, 1.0)

    a = spec.alpha_synth
    latency = spec.base_latencies() * ((1.0 - a) + a * (1.0 - sparsity))

    out = []
    for s in range(spec.num_samples):
        layers = tuple(LayerTrace(float(latency[s, j]), float(sparsity[s, j])) for j in range(L))
        out.append(SampleTrace(spec.key, layers, str(s)))
    return out


def _name_hash(text: str) -> int:
    # Stable across processes, unlike hash().
    return int.from_bytes(text.encode()[:8].ljust(8, b"\0"), "little") ^ len(text)


def assign_slos(requests: Iterable[Request], slo_multiplier: float) -> list[Request]:
    """Set each deadline to arrival + isolated latency * slo_multiplier (in place)."""
    if slo_multiplier <= 1.0:
        log.warning("slo_multiplier %.3g <= 1: deadlines are infeasible even in isolation", slo_multiplier)
    out = list(requests)
    for r in out:
        r.slo_multiplier = float(slo_multiplier)
        r.deadline = r.arrival + r.trace.total_latency * slo_multiplier
    return out


def gen_arrivals(spec: WorkloadSpec) -> list[Request]:
    """Poisson arrivals with traces drawn uniformly (with replacement) from the pool."""
    gaps = substream(spec.seed, "arrivals").exponential(1.0 / spec.arrival_rate, spec.num_requests)
    arrivals = np.cumsum(gaps)
    picks = substream(spec.seed, "trace_choice").integers(0, len(spec.trace_pool), spec.num_requests)
    requests = []
    for i in range(spec.num_requests):
        trace = spec.trace_pool[int(picks[i])]
        requests.append(Request(i, trace.model_key, float(arrivals[i]), trace))
    return assign_slos(requests, spec.slo_multiplier)


def write_requests(requests: Iterable[Request], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REQUEST_COLUMNS)
        for r in requests:
            w.writerow(r.as_row())


def load_requests(path: str | Path, traces: Iterable[SampleTrace]) -> list[Request]:
    """Read a request CSV, resolving each row's trace by (model, pattern, sample_id)."""
    by_id = {(t.model_key, t.sample_id): t for t in traces}
    out = []
    with Path(path).open(newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            key = ModelPatternKey(row["model_name"], Pattern.parse(row["pattern"]))
            trace = by_id.get((key, row["sample_id"]))
            if trace is None:
                raise TraceError(f"{path}: line {lineno}: no trace {key}#{row['sample_id']}")
            arrival = _parse_float(row["arrival_s"], "arrival_s", lineno)
            deadline = _parse_float(row["deadline_s"], "deadline_s", lineno)
            r = Request(int(row["request_id"]), key, arrival, trace, deadline)
            r.slo_multiplier = (deadline - arrival) / trace.total_latency
            out.append(r)
    out.sort(key=lambda r: (r.arrival, r.id))
    return out


def group_by_key(traces: Iterable[SampleTrace]) -> dict[ModelPatternKey, list[SampleTrace]]:
    ordered = sorted(traces, key=lambda t: t.model_key)
    return {k: list(g) for k, g in groupby(ordered, key=lambda t: t.model_key)}
