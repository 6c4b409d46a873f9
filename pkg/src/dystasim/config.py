"""Scenario configuration: a flat TOML file with a few sections.

Top-level keys pick the sweep (schedulers, seeds, slo_multiplier, arrival_rate,
num_requests, output_dir). ``[workload]`` names the trace source, ``[dysta]``,
``[sdrm3]``, ``[prema]`` and ``[sim]`` tune the policies and the engine. See
README.md for every key.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .baselines import SCHEDULERS, Sdrm3Config
from .dysta import DystaConfig, Precision
from .predictor import CoeffStrategy, PredictorConfig
from .presets import PRESETS
from .sim import SimConfig
from .workload import Pattern, SynthSpec


class ConfigError(ValueError):
    pass


def _as_list(value, what: str) -> list[float]:
    vals = value if isinstance(value, list) else [value]
    if not vals:
        raise ConfigError(f"{what} sweep list is empty")
    try:
        out = [float(v) for v in vals]
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be a number or a list of numbers") from None
    if any(not math.isfinite(v) or v <= 0 for v in out):
        raise ConfigError(f"{what} values must be finite and > 0")
    return out


@dataclass
class WorkloadSource:
    preset: str | None = "attnn-like"
    traces: str | None = None  # trace CSV path
    profiles: str | None = None  # profile CSV path; default builds them from the pool
    synth: list[dict] = field(default_factory=list)  # SynthSpec tables
    pool_seed: int = 0

    def validate(self) -> None:
        given = sum(bool(x) for x in (self.preset, self.traces, self.synth))
        if given != 1:
            raise ConfigError("[workload] needs exactly one of preset, traces or synth")
        if self.preset and self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESETS)}")
        for table in self.synth:
            synth_spec(table)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"pool_seed": self.pool_seed}
        for k in ("preset", "traces", "profiles"):
            if getattr(self, k):
                d[k] = getattr(self, k)
        if self.synth:
            d["synth"] = [dict(t) for t in self.synth]
        return d


def synth_spec(table: dict) -> SynthSpec:
    known = {f.name for f in fields(SynthSpec)}
    unknown = set(table) - known
    if unknown:
        raise ConfigError(f"unknown synth keys: {', '.join(sorted(unknown))}")
    kw = dict(table)
    try:
        kw["pattern"] = Pattern.parse(kw.get("pattern", "dense"))
        if isinstance(kw.get("base_latency"), list):
            kw["base_latency"] = tuple(float(x) for x in kw["base_latency"])
        return SynthSpec(**kw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad synth table {table}: {e}") from None


_DYSTA_KEYS = ("beta", "eta", "coeff_strategy", "last_n", "alpha", "gamma_min", "gamma_max",
               "score_precision", "penalty_sign", "sparsity_aware", "slack_mode", "wait_mode",
               "time_unit_s")
_SIM_KEYS = tuple(f.name for f in fields(SimConfig))


@dataclass
class ScenarioConfig:
    schedulers: list[str] = field(default_factory=lambda: ["fcfs", "sjf", "prema", "planaria", "sdrm3", "dysta"])
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    slo_multiplier: list[float] = field(default_factory=lambda: [10.0])
    arrival_rate: list[float] = field(default_factory=lambda: [30.0])
    num_requests: int = 1000
    output_dir: str = "results"
    per_request: bool = True
    workload: WorkloadSource = field(default_factory=WorkloadSource)
    dysta: dict = field(default_factory=dict)
    sdrm3: dict = field(default_factory=dict)
    prema: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    base_dir: Path = field(default=Path("."), compare=False)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str | Path = ".") -> "ScenarioConfig":
        raw = dict(raw)
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = cls(base_dir=Path(base_dir))
        if "schedulers" in raw:
            s = raw["schedulers"]
            cfg.schedulers = [s] if isinstance(s, str) else list(s)
        if "seeds" in raw:
            s = raw["seeds"]
            cfg.seeds = [s] if isinstance(s, int) else list(s)
        if "slo_multiplier" in raw:
            cfg.slo_multiplier = _as_list(raw["slo_multiplier"], "slo_multiplier")
        if "arrival_rate" in raw:
            cfg.arrival_rate = _as_list(raw["arrival_rate"], "arrival_rate")
        for k in ("num_requests", "output_dir", "per_request"):
            if k in raw:
                setattr(cfg, k, raw[k])
        if "workload" in raw:
            w = dict(raw["workload"])
            bad = set(w) - {f.name for f in fields(WorkloadSource)}
            if bad:
                raise ConfigError(f"unknown [workload] keys: {', '.join(sorted(bad))}")
            if any(k in w for k in ("traces", "synth")) and "preset" not in w:
                w["preset"] = None
            cfg.workload = WorkloadSource(**w)
        for section in ("dysta", "sdrm3", "prema", "sim"):
            if section in raw:
                setattr(cfg, section, dict(raw[section]))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not self.schedulers:
            raise ConfigError("schedulers list is empty")
        for s in self.schedulers:
            if s not in SCHEDULERS:
                raise ConfigError(f"unknown scheduler {s!r}; choose from {', '.join(SCHEDULERS)}")
        if len(set(self.schedulers)) != len(self.schedulers):
            raise ConfigError("schedulers must be distinct")
        if not self.seeds:
            raise ConfigError("seeds list is empty")
        if not all(isinstance(s, int) and not isinstance(s, bool) for s in self.seeds):
            raise ConfigError("seeds must be integers")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if not isinstance(self.num_requests, int) or self.num_requests < 1:
            raise ConfigError("num_requests must be a positive integer")
        self.workload.validate()
        bad = set(self.dysta) - set(_DYSTA_KEYS)
        if bad:
            raise ConfigError(f"unknown [dysta] keys: {', '.join(sorted(bad))}")
        bad = set(self.sim) - set(_SIM_KEYS)
        if bad:
            raise ConfigError(f"unknown [sim] keys: {', '.join(sorted(bad))}")
        bad = set(self.prema) - {"default_priority", "priorities"}
        if bad:
            raise ConfigError(f"unknown [prema] keys: {', '.join(sorted(bad))}")
        # Building the objects runs their own validation.
        self.dysta_config()
        self.sdrm3_config()
        self.sim_config()

    def dysta_config(self) -> DystaConfig:
        d = dict(self.dysta)
        try:
            strategy = CoeffStrategy.parse(d.pop("coeff_strategy", "last_one"), int(d.pop("last_n", 3)))
            clamp = {k: float(d.pop(k)) for k in ("gamma_min", "gamma_max") if k in d}
            pred = PredictorConfig(strategy, float(d.pop("alpha", 1.0)), **clamp)
            if "score_precision" in d:
                d["score_precision"] = Precision(d["score_precision"])
            return DystaConfig(predictor=pred, **d)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad [dysta] section: {e}") from None

    def sdrm3_config(self) -> Sdrm3Config:
        try:
            return Sdrm3Config(**self.sdrm3)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad [sdrm3] section: {e}") from None

    def sim_config(self) -> SimConfig:
        try:
            return SimConfig(**self.sim)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad [sim] section: {e}") from None

    def prema_priorities(self) -> dict[int, int]:
        return {int(k): int(v) for k, v in self.prema.get("priorities", {}).items()}

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def cells(self) -> list[tuple[str, float, float, int]]:
        """Every (scheduler, slo_multiplier, arrival_rate, seed) in a fixed order."""
        return [(s, m, r, seed) for s in self.schedulers for m in self.slo_multiplier
                for r in self.arrival_rate for seed in self.seeds]

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "schedulers": list(self.schedulers), "seeds": list(self.seeds),
            "slo_multiplier": list(self.slo_multiplier), "arrival_rate": list(self.arrival_rate),
            "num_requests": self.num_requests, "output_dir": self.output_dir,
            "per_request": self.per_request, "workload": self.workload.to_dict(),
        }
        for section in ("dysta", "sdrm3", "prema", "sim"):
            v = getattr(self, section)
            if v:
                d[section] = dict(v)
        return d

    def dumps(self) -> str:
        return tomli_w.dumps(_drop_none(self.to_dict()))


def _drop_none(d):
    if isinstance(d, dict):
        return {k: _drop_none(v) for k, v in d.items() if v is not None}
    if isinstance(d, list):
        return [_drop_none(v) for v in d]
    return d


def loads(text: str, base_dir: str | Path = ".") -> ScenarioConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML: {e}") from None
    return ScenarioConfig.from_dict(raw, base_dir)


def load(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return loads(text, path.parent)


def dump(config: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(config.dumps())
