"""Recurrent, dense and repeat layers with hand-written backward passes.

Every layer works on batches: sequences are ``(N, T, D)`` arrays, vectors
``(N, D)``. ``forward`` caches what ``backward`` needs; ``backward`` takes the
upstream gradient, accumulates parameter gradients into ``self.grads`` and
returns the gradient with respect to the layer input.
"""
from __future__ import annotations

import numpy as np

from .activations import Activation, sigmoid


class ShapeError(ValueError):
    pass


def glorot_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    fan_in, fan_out = shape[0], shape[1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _as_batch(x: np.ndarray, ndim: int) -> tuple:
    x = np.asarray(x, dtype=float)
    if x.ndim == ndim - 1:
        return x[None], True
    if x.ndim != ndim:
        raise ShapeError(f"expected a {ndim - 1}-D or {ndim}-D input, got shape {x.shape}")
    return x, False


def _check_weights(weights: dict, d: int, h: int, gates: int) -> None:
    expected = {"kernel": (d, gates * h), "recurrent": (h, gates * h), "bias": (gates * h,)}
    for name, shape in expected.items():
        if weights[name].shape != shape:
            raise ShapeError(f"{name} has shape {weights[name].shape}, expected {shape}")


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict = {}
        self.grads: dict = {}

    def zero_grad(self):
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}


# ---------------------------------------------------------------- GRU

def _gru_run(weights, x, h0, act: Activation):
    """Forward recursion; returns hidden states (N, T+1, H) and gate caches."""
    W, U, b = weights["kernel"], weights["recurrent"], weights["bias"]
    n, steps, d = x.shape
    hdim = U.shape[0]
    _check_weights(weights, d, hdim, 3)
    Uz, Ur, Uh = U[:, :hdim], U[:, hdim:2 * hdim], U[:, 2 * hdim:]
    xw = x @ W + b
    hs = np.empty((n, steps + 1, hdim))
    hs[:, 0] = h0
    z = np.empty((n, steps, hdim))
    r = np.empty_like(z)
    a_h = np.empty_like(z)
    cand = np.empty_like(z)
    h = hs[:, 0]
    for t in range(steps):
        xz, xr, xh = xw[:, t, :hdim], xw[:, t, hdim:2 * hdim], xw[:, t, 2 * hdim:]
        z[:, t] = sigmoid(xz + h @ Uz)
        r[:, t] = sigmoid(xr + h @ Ur)
        a_h[:, t] = xh + (r[:, t] * h) @ Uh
        cand[:, t] = act(a_h[:, t])
        h = (1.0 - z[:, t]) * h + z[:, t] * cand[:, t]
        hs[:, t + 1] = h
    return hs, (z, r, a_h, cand)


def gru_forward(weights: dict, x, h0=None, activation: str = "tanh") -> np.ndarray:
    """Hidden-state sequence of a GRU cell.

    ``z = sig(x Wz + h Uz + bz)``, ``r = sig(x Wr + h Ur + br)``,
    ``c = act(x Wh + (r*h) Uh + bh)``, ``h' = (1 - z) * h + z * c``.
    Weights use the packed layout ``kernel (D, 3H)``, ``recurrent (H, 3H)``,
    ``bias (3H,)`` with gate order z, r, h.
    """
    xb, single = _as_batch(x, 3)
    hdim = weights["recurrent"].shape[0]
    h0 = np.zeros((xb.shape[0], hdim)) if h0 is None else np.broadcast_to(np.asarray(h0, float), (xb.shape[0], hdim))
    hs, _ = _gru_run(weights, xb, h0, Activation(activation))
    out = hs[:, 1:]
    return out[0] if single else out


class GRU(Layer):
    kind = "gru"

    def __init__(self, input_dim: int, units: int, activation: str = "tanh",
                 return_sequences: bool = False, rng=None, scale=None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.units = units
        self.act = Activation(activation, scale)
        self.return_sequences = return_sequences
        self.params = {
            "kernel": glorot_uniform(rng, (input_dim, 3 * units)),
            "recurrent": glorot_uniform(rng, (units, 3 * units)),
            "bias": np.zeros(3 * units),
        }
        self.zero_grad()

    def forward(self, x):
        if x.ndim != 3:
            raise ShapeError(f"GRU expects (N, T, D) input, got {x.shape}")
        h0 = np.zeros((x.shape[0], self.units))
        hs, gates = _gru_run(self.params, x, h0, self.act)
        self._cache = (x, hs, gates)
        return hs[:, 1:] if self.return_sequences else hs[:, -1]

    def backward(self, dy):
        x, hs, (z, r, a_h, cand) = self._cache
        n, steps, d = x.shape
        hdim = self.units
        W, U = self.params["kernel"], self.params["recurrent"]
        Uz, Ur, Uh = U[:, :hdim], U[:, hdim:2 * hdim], U[:, 2 * hdim:]
        if self.return_sequences:
            dh_seq = dy
        else:
            dh_seq = np.zeros((n, steps, hdim))
            dh_seq[:, -1] = dy
        dxw = np.empty((n, steps, 3 * hdim))
        dU = np.zeros_like(U)
        dh_next = np.zeros((n, hdim))
        for t in range(steps - 1, -1, -1):
            dh = dh_seq[:, t] + dh_next
            h_prev = hs[:, t]
            zt, rt, ct = z[:, t], r[:, t], cand[:, t]
            dz = dh * (ct - h_prev)
            dh_prev = dh * (1.0 - zt)
            da_h = dh * zt * self.act.grad(a_h[:, t], ct)
            rh = rt * h_prev
            dU[:, 2 * hdim:] += rh.T @ da_h
            drh = da_h @ Uh.T
            dh_prev += drh * rt
            da_r = drh * h_prev * rt * (1.0 - rt)
            da_z = dz * zt * (1.0 - zt)
            dU[:, :hdim] += h_prev.T @ da_z
            dU[:, hdim:2 * hdim] += h_prev.T @ da_r
            dh_prev += da_z @ Uz.T + da_r @ Ur.T
            dxw[:, t, :hdim] = da_z
            dxw[:, t, hdim:2 * hdim] = da_r
            dxw[:, t, 2 * hdim:] = da_h
            dh_next = dh_prev
        flat = dxw.reshape(-1, 3 * hdim)
        self.grads["kernel"] += x.reshape(-1, d).T @ flat
        self.grads["recurrent"] += dU
        self.grads["bias"] += flat.sum(axis=0)
        return dxw @ W.T


# ---------------------------------------------------------------- LSTM

def _lstm_run(weights, x, h0, c0, act: Activation):
    W, U, b = weights["kernel"], weights["recurrent"], weights["bias"]
    n, steps, d = x.shape
    hdim = U.shape[0]
    _check_weights(weights, d, hdim, 4)
    xw = x @ W + b
    hs = np.empty((n, steps + 1, hdim))
    cs = np.empty((n, steps + 1, hdim))
    hs[:, 0], cs[:, 0] = h0, c0
    gates = np.empty((n, steps, 4 * hdim))  # activated i, f, g, o
    a_g = np.empty((n, steps, hdim))
    act_c = np.empty((n, steps, hdim))
    h, c = hs[:, 0], cs[:, 0]
    for t in range(steps):
        a = xw[:, t] + h @ U
        i = sigmoid(a[:, :hdim])
        f = sigmoid(a[:, hdim:2 * hdim])
        a_g[:, t] = a[:, 2 * hdim:3 * hdim]
        g = act(a_g[:, t])
        o = sigmoid(a[:, 3 * hdim:])
        c = f * c + i * g
        act_c[:, t] = act(c)
        h = o * act_c[:, t]
        gates[:, t] = np.concatenate([i, f, g, o], axis=1)
        hs[:, t + 1], cs[:, t + 1] = h, c
    return hs, cs, gates, a_g, act_c


def lstm_forward(weights: dict, x, h0=None, c0=None, activation: str = "tanh") -> np.ndarray:
    """Hidden-state sequence of an LSTM cell (gate order i, f, g, o).

    ``c' = f * c + i * act(g)``, ``h' = o * act(c')``.
    """
    xb, single = _as_batch(x, 3)
    hdim = weights["recurrent"].shape[0]
    shape = (xb.shape[0], hdim)
    h0 = np.zeros(shape) if h0 is None else np.broadcast_to(np.asarray(h0, float), shape)
    c0 = np.zeros(shape) if c0 is None else np.broadcast_to(np.asarray(c0, float), shape)
    hs, _, _, _, _ = _lstm_run(weights, xb, h0, c0, Activation(activation))
    out = hs[:, 1:]
    return out[0] if single else out


class LSTM(Layer):
    kind = "lstm"

    def __init__(self, input_dim: int, units: int, activation: str = "tanh",
                 return_sequences: bool = False, rng=None, scale=None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.units = units
        self.act = Activation(activation, scale)
        self.return_sequences = return_sequences
        self.params = {
            "kernel": glorot_uniform(rng, (input_dim, 4 * units)),
            "recurrent": glorot_uniform(rng, (units, 4 * units)),
            "bias": np.zeros(4 * units),
        }
        self.zero_grad()

    def forward(self, x):
        if x.ndim != 3:
            raise ShapeError(f"LSTM expects (N, T, D) input, got {x.shape}")
        zeros = np.zeros((x.shape[0], self.units))
        run = _lstm_run(self.params, x, zeros, zeros, self.act)
        self._cache = (x,) + run
        hs = run[0]
        return hs[:, 1:] if self.return_sequences else hs[:, -1]

    def backward(self, dy):
        x, hs, cs, gates, a_g, act_c = self._cache
        n, steps, d = x.shape
        hdim = self.units
        W, U = self.params["kernel"], self.params["recurrent"]
        if self.return_sequences:
            dh_seq = dy
        else:
            dh_seq = np.zeros((n, steps, hdim))
            dh_seq[:, -1] = dy
        da = np.empty((n, steps, 4 * hdim))
        dU = np.zeros_like(U)
        dh_next = np.zeros((n, hdim))
        dc_next = np.zeros((n, hdim))
        for t in range(steps - 1, -1, -1):
            i = gates[:, t, :hdim]
            f = gates[:, t, hdim:2 * hdim]
            g = gates[:, t, 2 * hdim:3 * hdim]
            o = gates[:, t, 3 * hdim:]
            c_prev, h_prev, c_t = cs[:, t], hs[:, t], cs[:, t + 1]
            dh = dh_seq[:, t] + dh_next
            do = dh * act_c[:, t]
            dc = dc_next + dh * o * self.act.grad(c_t, act_c[:, t])
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dc_next = dc * f
            da[:, t, :hdim] = di * i * (1.0 - i)
            da[:, t, hdim:2 * hdim] = df * f * (1.0 - f)
            da[:, t, 2 * hdim:3 * hdim] = dg * self.act.grad(a_g[:, t], g)
            da[:, t, 3 * hdim:] = do * o * (1.0 - o)
            dU += h_prev.T @ da[:, t]
            dh_next = da[:, t] @ U.T
        flat = da.reshape(-1, 4 * hdim)
        self.grads["kernel"] += x.reshape(-1, d).T @ flat
        self.grads["recurrent"] += dU
        self.grads["bias"] += flat.sum(axis=0)
        return da @ W.T


# ---------------------------------------------------------------- dense & repeat

def dense_forward(weights: dict, x, activation: str = "linear", scale=None) -> np.ndarray:
    W, b = weights["kernel"], weights["bias"]
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != W.shape[0]:
        raise ShapeError(f"input width {x.shape[-1]} does not match kernel {W.shape}")
    return Activation(activation, scale)(x @ W + b)


def time_distributed_dense(weights: dict, seq, activation: str = "linear", scale=None) -> np.ndarray:
    """The same affine map and activation applied at every step of ``seq``
    (shape ``(T, D)`` or ``(N, T, D)``)."""
    seq = np.asarray(seq, dtype=float)
    if seq.ndim not in (2, 3):
        raise ShapeError(f"expected a sequence, got shape {seq.shape}")
    return dense_forward(weights, seq, activation, scale)


class Dense(Layer):
    """Affine layer; applied per step when fed a sequence."""

    kind = "dense"

    def __init__(self, input_dim: int, units: int, activation: str = "linear", rng=None, scale=None,
                 time_distributed: bool = False):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.units = units
        self.act = Activation(activation, scale)
        self.time_distributed = time_distributed
        if time_distributed:
            self.kind = "time_distributed_dense"
        self.params = {"kernel": glorot_uniform(rng, (input_dim, units)), "bias": np.zeros(units)}
        self.zero_grad()

    def forward(self, x):
        expected = 3 if self.time_distributed else 2
        if x.ndim != expected:
            raise ShapeError(f"{self.kind} expects a {expected}-D input, got {x.shape}")
        a = x @ self.params["kernel"] + self.params["bias"]
        y = self.act(a)
        self._cache = (x, a, y)
        return y

    def backward(self, dy):
        x, a, y = self._cache
        da = dy * self.act.grad(a, y)
        d = x.shape[-1]
        flat = da.reshape(-1, self.units)
        self.grads["kernel"] += x.reshape(-1, d).T @ flat
        self.grads["bias"] += flat.sum(axis=0)
        return da @ self.params["kernel"].T


def repeat_expand(vector, w_out: int) -> np.ndarray:
    """Stack ``w_out`` copies of ``vector`` along a new time axis."""
    if w_out < 1:
        raise ShapeError(f"w_out must be >= 1, got {w_out}")
    v = np.asarray(vector, dtype=float)
    return np.repeat(v[..., None, :], w_out, axis=-2)


class RepeatExpand(Layer):
    kind = "repeat_expand"

    def __init__(self, steps: int):
        super().__init__()
        if steps < 1:
            raise ShapeError(f"repeat count must be >= 1, got {steps}")
        self.steps = steps

    def forward(self, x):
        if x.ndim != 2:
            raise ShapeError(f"repeat_expand expects (N, D) input, got {x.shape}")
        return repeat_expand(x, self.steps)

    def backward(self, dy):
        return dy.sum(axis=1)
