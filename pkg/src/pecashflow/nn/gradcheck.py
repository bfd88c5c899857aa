"""Central finite-difference verification of backward passes."""
from __future__ import annotations

import numpy as np

from .loss import weighted_mse, weighted_mse_grad
from .network import Network, NetworkSpec

# gradients smaller than this are compared in absolute terms
REL_FLOOR = 1e-6


def analytic_gradients(net: Network, x, y, weights=None, mask=None) -> dict:
    net.zero_grad()
    pred = net.forward(x)
    net.backward(weighted_mse_grad(pred, y, weights, mask))
    return {k: v.copy() for k, v in net.named_grads().items()}


def gradient_check(spec_or_net, sample, step: float = 1e-5, max_params: int = 2000) -> float:
    """Max relative error between backward and central differences over every
    parameter. ``sample`` is ``(x, y)`` or ``(x, y, weights, mask)``."""
    net = spec_or_net if isinstance(spec_or_net, Network) else Network(spec_or_net)
    if net.n_params() > max_params:
        raise ValueError(f"network has {net.n_params()} parameters; gradient check limited to {max_params}")
    x, y, *rest = sample
    weights = rest[0] if len(rest) > 0 else None
    mask = rest[1] if len(rest) > 1 else None
    analytic = analytic_gradients(net, x, y, weights, mask)
    params = net.named_params()
    worst = 0.0
    for name, p in params.items():
        flat = p.reshape(-1)
        ga = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = weighted_mse(net.forward(x), y, weights, mask)
            flat[i] = orig - step
            down = weighted_mse(net.forward(x), y, weights, mask)
            flat[i] = orig
            gn = (up - down) / (2.0 * step)
            err = abs(gn - ga[i]) / max(abs(gn), abs(ga[i]), REL_FLOOR)
            worst = max(worst, err)
    return worst
