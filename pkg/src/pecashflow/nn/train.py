"""Seeded mini-batch training loop."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .loss import weighted_mse, weighted_mse_grad
from .network import Network, NetworkSpec
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.adam_epsilon <= 0 or self.learning_rate <= 0:
            raise ValueError("learning rate and epsilon must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainData:
    """Stacked windows: x (N, T, F), y (N, S, K), weights (N,), mask (N, S)."""

    x: np.ndarray
    y: np.ndarray
    weights: np.ndarray = None
    mask: np.ndarray = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        n = len(self.x)
        if n == 0:
            raise ValueError("no training windows")
        if len(self.y) != n:
            raise ValueError("x and y hold different numbers of windows")
        self.weights = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=float)
        self.mask = np.ones(self.y.shape[:2], dtype=bool) if self.mask is None else np.asarray(self.mask, dtype=bool)

    def __len__(self):
        return len(self.x)

    def subset(self, idx) -> "TrainData":
        return TrainData(self.x[idx], self.y[idx], self.weights[idx], self.mask[idx])


def evaluate_loss(net: Network, data: TrainData) -> float:
    return weighted_mse(net.predict(data.x), data.y, data.weights, data.mask)


def train(spec: NetworkSpec, data: TrainData, cfg: TrainConfig, validation: Optional[TrainData] = None,
          network: Optional[Network] = None):
    """Train with Adam on shuffled mini-batches.

    Returns ``(network, history)`` where ``history`` has per-epoch ``train``
    losses (weight-averaged over the epoch's batches) and, when a validation
    set is given, ``validation`` losses measured after each epoch.
    """
    net = network or Network(spec)
    rng = np.random.default_rng(cfg.seed)
    state = AdamState()
    history = {"train": [], "validation": []}
    n = len(data)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total, wsum = 0.0, 0.0
        for b, start in enumerate(range(0, n, cfg.batch_size), start=1):
            batch = data.subset(order[start:start + cfg.batch_size])
            net.zero_grad()
            pred = net.forward(batch.x)
            loss = weighted_mse(pred, batch.y, batch.weights, batch.mask)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss {loss} at epoch {epoch}, batch {b}")
            net.backward(weighted_mse_grad(pred, batch.y, batch.weights, batch.mask))
            params, state = adam_step(net.named_params(), net.named_grads(), state, cfg.learning_rate,
                                      cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon)
            net.set_params(params)
            bw = float(batch.weights.sum())
            total += loss * bw
            wsum += bw
        history["train"].append(total / wsum)
        if validation is not None:
            history["validation"].append(evaluate_loss(net, validation))
        log.debug("epoch %d train %.6g", epoch, history["train"][-1])
    if validation is None:
        del history["validation"]
    return net, history
