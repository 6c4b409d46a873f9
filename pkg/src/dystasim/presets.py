"""Synthetic trace pools for the two workload classes.

Per-layer base latencies are calibrated so that the class's reference arrival
rate (30/s for attention models, 3/s for CNNs) loads the accelerator close to
saturation, and the top of each rate range overloads it.
"""
from __future__ import annotations

from dataclasses import dataclass

from .workload import Pattern, SampleTrace, SynthSpec, synth_traces


@dataclass(frozen=True)
class Preset:
    name: str
    specs: tuple[SynthSpec, ...]
    rates: tuple[float, ...]
    reference_rate: float

    def pool(self, seed: int = 0) -> list[SampleTrace]:
        return [t for s in self.specs for t in synth_traces(s, seed)]


def _attn(name: str, base: float) -> SynthSpec:
    # Dynamic attention pruning: wide per-input swings, strongly correlated across layers.
    return SynthSpec(name, Pattern.DYNAMIC_ATTENTION, num_layers=12, base_latency=base,
                     mean_sparsity=0.6, rel_range=0.9, correlation=0.9, alpha_synth=0.9,
                     num_samples=200, layer_spread=0.3)


def _cnn(name: str, pattern: Pattern, base: float) -> SynthSpec:
    # Activation sparsity after ReLU: moderate per-input variance.
    return SynthSpec(name, pattern, num_layers=16, base_latency=base,
                     mean_sparsity=0.5, rel_range=0.4, correlation=0.9, alpha_synth=0.9,
                     num_samples=200, layer_spread=0.3)


ATTNN_LIKE = Preset(
    "attnn-like",
    (_attn("bert", 5e-3), _attn("bart", 9e-3), _attn("gpt2", 3.5e-3)),
    rates=(10.0, 20.0, 30.0, 40.0),
    reference_rate=30.0,
)

CNN_LIKE = Preset(
    "cnn-like",
    (_cnn("resnet50", Pattern.POINTWISE_RANDOM, 30e-3),
     _cnn("vgg16", Pattern.CHANNELWISE, 50e-3),
     _cnn("mobilenet", Pattern.BLOCK_NM, 28e-3)),
    rates=(2.0, 3.0, 4.0, 5.0, 6.0),
    reference_rate=3.0,
)

PRESETS = {p.name: p for p in (ATTNN_LIKE, CNN_LIKE)}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
