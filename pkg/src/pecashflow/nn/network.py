"""Network topology specs and the sequential model built from them."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .activations import NAMES as ACTIVATIONS
from .layers import GRU, LSTM, Dense, RepeatExpand, ShapeError

KINDS = ("gru", "lstm", "dense", "repeat_expand", "time_distributed_dense")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    units: int
    activation: str = "linear"
    return_sequences: bool = False
    scale: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}; expected one of {KINDS}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.units < 1:
            raise ValueError(f"units must be >= 1, got {self.units}")
        if self.scale is not None:
            object.__setattr__(self, "scale", tuple(float(s) for s in np.atleast_1d(self.scale)))


@dataclass(frozen=True)
class NetworkSpec:
    input_features: int
    layers: tuple
    output_targets: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(
            l if isinstance(l, LayerSpec) else LayerSpec(**l) for l in self.layers
        ))
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        if self.layers[-1].units != self.output_targets:
            raise ValueError(
                f"last layer emits {self.layers[-1].units} values per step, expected {self.output_targets}"
            )
        repeats = sum(l.kind == "repeat_expand" for l in self.layers)
        if repeats > 1:
            raise ValueError("at most one repeat_expand layer is allowed")

    @property
    def hidden_sizes(self) -> list:
        return [l.units for l in self.layers if l.kind in ("gru", "lstm")]

    @property
    def output_steps(self) -> Optional[int]:
        """Decoder length for sequence-to-sequence nets, None for vector heads."""
        for l in self.layers:
            if l.kind == "repeat_expand":
                return l.units
        return None

    def to_dict(self) -> dict:
        return {
            "input_features": self.input_features,
            "output_targets": self.output_targets,
            "seed": self.seed,
            "layers": [
                {**asdict(l), "scale": None if l.scale is None else list(l.scale)} for l in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(d["input_features"], tuple(LayerSpec(**l) for l in d["layers"]), d["output_targets"], d.get("seed", 0))


class Network:
    """Sequential stack of layers built deterministically from a spec."""

    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        rng = np.random.default_rng(spec.seed)
        self.layers = []
        width, is_seq = spec.input_features, True
        for ls in spec.layers:
            if ls.kind in ("gru", "lstm"):
                if not is_seq:
                    raise ShapeError(f"{ls.kind} layer needs a sequence input")
                cls = GRU if ls.kind == "gru" else LSTM
                layer = cls(width, ls.units, ls.activation, ls.return_sequences, rng, ls.scale)
                width, is_seq = ls.units, ls.return_sequences
            elif ls.kind == "repeat_expand":
                if is_seq:
                    raise ShapeError("repeat_expand needs a vector input")
                layer = RepeatExpand(ls.units)
                is_seq = True
            else:
                td = ls.kind == "time_distributed_dense"
                if td != is_seq:
                    raise ShapeError(f"{ls.kind} got a {'sequence' if is_seq else 'vector'} input")
                layer = Dense(width, ls.units, ls.activation, rng, ls.scale, time_distributed=td)
                width = ls.units
            self.layers.append(layer)
        self.output_is_sequence = is_seq

    # parameters are addressed as "<layer index>.<kind>.<name>"
    def named_params(self) -> dict:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, value in layer.params.items():
                out[f"{i}.{layer.kind}.{name}"] = value
        return out

    def named_grads(self) -> dict:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, value in layer.grads.items():
                out[f"{i}.{layer.kind}.{name}"] = value
        return out

    def n_params(self) -> int:
        return int(sum(v.size for v in self.named_params().values()))

    def set_params(self, tensors: dict) -> None:
        current = self.named_params()
        if set(tensors) != set(current):
            raise ValueError(f"parameter names differ: {sorted(set(tensors) ^ set(current))}")
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                arr = np.asarray(tensors[f"{i}.{layer.kind}.{name}"], dtype=float)
                if arr.shape != layer.params[name].shape:
                    raise ValueError(f"{i}.{layer.kind}.{name}: shape {arr.shape} != {layer.params[name].shape}")
                layer.params[name] = arr.copy()
        self.zero_grad()

    def zero_grad(self) -> None:
        for layer in self.layers:
            layer.zero_grad()

    def forward(self, x) -> np.ndarray:
        """``x`` is ``(N, T, F)``; returns ``(N, S, targets)`` where ``S`` is the
        decoder length, or 1 for vector heads."""
        out = np.asarray(x, dtype=float)
        if out.ndim != 3 or out.shape[-1] != self.spec.input_features:
            raise ShapeError(f"expected input (N, T, {self.spec.input_features}), got {out.shape}")
        for layer in self.layers:
            out = layer.forward(out)
        return out if self.output_is_sequence else out[:, None, :]

    def backward(self, dout) -> None:
        grad = dout if self.output_is_sequence else dout[:, 0, :]
        for layer in reversed(self.layers):
            grad = layer.backward(grad)

    def predict(self, x, batch_size: int = 256) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        parts = [self.forward(x[i:i + batch_size]) for i in range(0, len(x), batch_size)]
        return np.concatenate(parts, axis=0)
