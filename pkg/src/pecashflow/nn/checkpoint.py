"""JSON checkpoints: ``{spec, seed, tensors: {name: {shape, data}}}``.

Floats are written with Python's shortest round-trip repr, so a reload
restores every weight bit for bit.
"""
from __future__ import annotations

import json

import numpy as np

from ..dataio import atomic_write_text, dumps_json
from .network import Network, NetworkSpec


def checkpoint_dict(net: Network, extra: dict = None) -> dict:
    tensors = {
        name: {"shape": list(v.shape), "data": [float(x) for x in v.reshape(-1)]}
        for name, v in net.named_params().items()
    }
    out = {"spec": net.spec.to_dict(), "seed": net.spec.seed, "tensors": tensors}
    if extra:
        out.update(extra)
    return out


def save_checkpoint(net: Network, path, extra: dict = None) -> None:
    atomic_write_text(path, dumps_json(checkpoint_dict(net, extra)))


def network_from_dict(d: dict) -> Network:
    net = Network(NetworkSpec.from_dict(d["spec"]))
    net.set_params({k: np.array(t["data"], dtype=float).reshape(t["shape"]) for k, t in d["tensors"].items()})
    return net


def load_checkpoint(path):
    """Returns ``(network, checkpoint_dict)``."""
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return network_from_dict(d), d
