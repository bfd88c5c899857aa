"""Window-weighted mean squared error."""
from __future__ import annotations

import numpy as np


def _prepare(pred, target, weights, mask):
    """Flatten to (windows, cells); the first axis indexes windows."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"pred {pred.shape} and target {target.shape} differ")
    if pred.ndim == 1:
        pred, target = pred[None], target[None]
    n = pred.shape[0]
    if mask is None:
        m = np.ones(pred.shape)
    else:
        m = np.asarray(mask, dtype=float)
        if pred.ndim == 1:
            m = m[None]
        while m.ndim < pred.ndim:
            m = m[..., None]
        m = np.broadcast_to(m, pred.shape)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float).reshape(n)
    if np.any(w <= 0):
        raise ValueError("window weights must be > 0")
    m = m.reshape(n, -1)
    counts = m.sum(axis=1)
    if counts.sum() == 0:
        raise ValueError("every cell is masked; loss undefined")
    w_eff = np.where(counts > 0, w, 0.0)
    return pred.reshape(n, -1), target.reshape(n, -1), m, counts, w_eff


def weighted_mse(pred, target, weights=None, mask=None) -> float:
    """sum_i w_i * (mean of unmasked squared residuals of window i) / sum_i w_i.

    Windows with every cell masked drop out of both sums.
    """
    p, t, m, counts, w = _prepare(pred, target, weights, mask)
    sq = ((p - t) ** 2 * m).sum(axis=1)
    per_window = np.divide(sq, counts, out=np.zeros_like(sq), where=counts > 0)
    return float((w * per_window).sum() / w.sum())


def weighted_mse_grad(pred, target, weights=None, mask=None) -> np.ndarray:
    """Gradient of :func:`weighted_mse` with respect to ``pred``."""
    shape = np.shape(pred)
    p, t, m, counts, w = _prepare(pred, target, weights, mask)
    scale = np.divide(w, counts, out=np.zeros_like(w), where=counts > 0) / w.sum()
    return (2.0 * (p - t) * m * scale[:, None]).reshape(shape)
