"""Yale (Takahashi-Alexander) cash-flow model, annual and quarterly forms, and
the bounded least-squares calibration of its parameters on short windows.

Quarterly form, with period index ``t_q`` counted from 1 at the fund's first
reported quarter and fund age ``t = t_q / 4`` years::

    qCC_t = RC * (1 - CC_{t-1}) / 4
    qDC_t = RD_t * RVC_{t-1} * (1 + G)**0.25 / 4,   RD_t = min(1, max(Y, (t / L)**B))
    RVC_t = RVC_{t-1} * (1 + G)**0.25 + qCC_t - qDC_t
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

DEFAULT_LIFE = 16.0
RC_BOUNDS = (0.0, 1.0)
G_BOUNDS = (0.0, 1.0)
B_BOUNDS = (0.0, 5.0)
GRID_RC = 101
GRID_GB = 65
# simplex searches start from this many grid local minima
GB_STARTS = 4
RC_TOL = 1e-12


class YaleError(ValueError):
    pass


@dataclass(frozen=True)
class YaleParams:
    rc: float
    g: float
    b: float
    l: float = DEFAULT_LIFE
    y: float = 0.0
    cc_total: float = 1.0

    def __post_init__(self):
        checks = [
            (RC_BOUNDS[0] <= self.rc <= RC_BOUNDS[1], "rc must lie in [0, 1]"),
            (G_BOUNDS[0] <= self.g <= G_BOUNDS[1], "g must lie in [0, 1]"),
            (B_BOUNDS[0] <= self.b <= B_BOUNDS[1], "b must lie in [0, 5]"),
            (self.l > 0, "l must be > 0"),
            (self.y >= 0, "y must be >= 0"),
            (self.cc_total > 0, "cc_total must be > 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise YaleError(f"{msg}: {self}")


@dataclass(frozen=True)
class YaleState:
    t: int
    pic: float
    nav: float
    cum_dist: float


def distribution_rate(t_years, b, l: float = DEFAULT_LIFE, y: float = 0.0):
    """``min(1, max(y, (t/l)**b))``; broadcasts over arrays."""
    rd = np.maximum(y, np.power(np.asarray(t_years, dtype=float) / l, b))
    return np.minimum(rd, 1.0)


def simulate_annual(params: YaleParams, horizon: int, nav0: float = 0.0) -> dict:
    """Annual model over years ``1..horizon``; returns arrays C, D, NAV, PIC."""
    if horizon < 1:
        raise YaleError(f"horizon must be >= 1, got {horizon}")
    if nav0 < 0:
        raise YaleError(f"nav0 must be >= 0, got {nav0}")
    c = np.empty(horizon)
    d = np.empty(horizon)
    nav = np.empty(horizon)
    pic_hist = np.empty(horizon)
    pic, prev = 0.0, nav0
    for i in range(horizon):
        t = i + 1
        pic_hist[i] = pic
        c[i] = params.rc * max(params.cc_total - pic, 0.0)
        grown = prev * (1.0 + params.g)
        d[i] = float(distribution_rate(t, params.b, params.l, params.y)) * grown
        nav[i] = grown + c[i] - d[i]
        pic += c[i]
        prev = nav[i]
    return {"C": c, "D": d, "NAV": nav, "PIC": pic_hist}


def _check_state(cc0: float, rvc0: float, cc_total: float = 1.0) -> None:
    # recycled capital can push called capital slightly past the commitment
    if not (0.0 <= cc0 <= cc_total * 1.2):
        raise YaleError(f"starting called fraction must lie in [0, {1.2 * cc_total}], got {cc0}")
    if not rvc0 >= 0:
        raise YaleError(f"starting NAV fraction must be >= 0, got {rvc0}")


def simulate_quarterly(params: YaleParams, horizon: int, cc0: float = 0.0, rvc0: float = 0.0,
                       start_quarter: int = 1) -> np.ndarray:
    """Roll the quarterly model forward from state (cc0, rvc0).

    The first simulated period has index ``start_quarter``. Returns a
    ``(horizon, 3)`` array with columns qCC, qDC, RVC.
    """
    if horizon < 1:
        raise YaleError(f"horizon must be >= 1, got {horizon}")
    if start_quarter < 1:
        raise YaleError(f"start_quarter must be >= 1, got {start_quarter}")
    _check_state(cc0, rvc0, params.cc_total)
    out = np.empty((horizon, 3))
    growth = (1.0 + params.g) ** 0.25
    rd = distribution_rate((start_quarter + np.arange(horizon)) / 4.0, params.b, params.l, params.y)
    cc, rvc = cc0, rvc0
    for i in range(horizon):
        qcc = params.rc * max(params.cc_total - cc, 0.0) / 4.0
        grown = rvc * growth
        qdc = rd[i] * grown / 4.0
        rvc = grown + qcc - qdc
        cc += qcc
        out[i] = (qcc, qdc, rvc)
    return out


def _roll_contributions(rc: np.ndarray, horizon: int, cc0: float) -> np.ndarray:
    """Vectorised qCC paths for an array of rates; shape (len(rc), horizon)."""
    rc = np.asarray(rc, dtype=float)
    out = np.empty(rc.shape + (horizon,))
    cc = np.full(rc.shape, float(cc0))
    for i in range(horizon):
        q = rc * np.maximum(1.0 - cc, 0.0) / 4.0
        out[..., i] = q
        cc = cc + q
    return out


def _roll_nav(qcc_model: np.ndarray, g, b, rvc0: float, start_quarter: int,
              l: float = DEFAULT_LIFE, y: float = 0.0):
    """Vectorised qDC / RVC paths for broadcastable arrays g, b."""
    g = np.asarray(g, dtype=float)
    b = np.asarray(b, dtype=float)
    horizon = qcc_model.shape[-1]
    shape = np.broadcast(g, b).shape
    growth = (1.0 + g) ** 0.25
    qdc = np.empty(shape + (horizon,))
    rvc_out = np.empty(shape + (horizon,))
    rvc = np.full(shape, float(rvc0))
    for i in range(horizon):
        t = (start_quarter + i) / 4.0
        rd = np.minimum(np.maximum(y, np.power(t / l, b)), 1.0)
        grown = rvc * growth
        d = rd * grown / 4.0
        rvc = grown + qcc_model[i] - d
        qdc[..., i] = d
        rvc_out[..., i] = rvc
    return qdc, rvc_out


def _weights(mask, n: int) -> np.ndarray:
    if mask is None:
        return np.ones(n)
    w = np.asarray(mask, dtype=float)
    if w.shape != (n,):
        raise YaleError(f"mask length {w.shape} does not match window length {n}")
    return w


def rc_objective(rc, qcc_obs, cc0: float, mask=None):
    """Sum of squared qCC residuals; ``rc`` may be an array."""
    qcc_obs = np.asarray(qcc_obs, dtype=float)
    w = _weights(mask, qcc_obs.size)
    pred = _roll_contributions(np.atleast_1d(rc), qcc_obs.size, cc0)
    sse = ((pred - qcc_obs) ** 2 * w).sum(axis=-1)
    return sse if np.ndim(rc) else float(sse[0])


def calibrate_rc(qcc_obs, cc0: float = 0.0, mask=None) -> float:
    """Least-squares RC on [0, 1]: 101-point grid, then golden-section search
    inside the bracket around the best grid point."""
    qcc_obs = np.asarray(qcc_obs, dtype=float)
    if qcc_obs.size < 1:
        raise YaleError("empty contribution window")
    _check_state(cc0, 0.0)
    grid = np.linspace(*RC_BOUNDS, GRID_RC)
    values = rc_objective(grid, qcc_obs, cc0, mask)
    k = int(np.argmin(values))
    if values[k] == values.max():
        # flat objective (nothing left to call, or fully masked): smallest rate
        return float(grid[0])
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, GRID_RC - 1)]
    f = lambda r: rc_objective(r, qcc_obs, cc0, mask)
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > RC_TOL:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    candidates = [(f(x), x) for x in (a, b, 0.5 * (a + b))] + [(values[k], grid[k])]
    best = min(candidates, key=lambda t: (t[0], t[1]))
    return float(best[1])


def gb_objective(g, b, qdc_obs, rvc_obs, cc0: float, rvc0: float, rc: float,
                 start_quarter: int, mask=None, l: float = DEFAULT_LIFE, y: float = 0.0):
    qdc_obs = np.asarray(qdc_obs, dtype=float)
    rvc_obs = np.asarray(rvc_obs, dtype=float)
    w = _weights(mask, qdc_obs.size)
    qcc_model = _roll_contributions(np.array(rc), qdc_obs.size, cc0)
    qdc, rvc = _roll_nav(qcc_model, g, b, rvc0, start_quarter, l, y)
    sse = (((qdc - qdc_obs) ** 2 + (rvc - rvc_obs) ** 2) * w).sum(axis=-1)
    return sse if np.ndim(sse) else float(sse)


def calibrate_gb(qdc_obs, rvc_obs, cc0: float, rvc0: float, rc: float, start_quarter: int,
                 mask=None, l: float = DEFAULT_LIFE, y: float = 0.0):
    """Least-squares (G, B) on [0,1] x [0,5] with RC held fixed.

    A 65 x 65 grid is scanned; bounded Nelder-Mead then refines each of its
    best ``GB_STARTS`` local minima and the lowest result wins. On a flat
    objective the first (lexicographically smallest) grid point is returned.
    Returns ``(g, b, objective)``.
    """
    qdc_obs = np.asarray(qdc_obs, dtype=float)
    rvc_obs = np.asarray(rvc_obs, dtype=float)
    if qdc_obs.shape != rvc_obs.shape or qdc_obs.size < 1:
        raise YaleError("distribution and NAV windows must be non-empty and of equal length")
    _check_state(cc0, rvc0)
    gs = np.linspace(*G_BOUNDS, GRID_GB)
    bs = np.linspace(*B_BOUNDS, GRID_GB)
    values = gb_objective(gs[:, None], bs[None, :], qdc_obs, rvc_obs, cc0, rvc0, rc,
                          start_quarter, mask, l, y)
    starts = _grid_minima(values, GB_STARTS)
    i, j = starts[0]
    best = (float(values[i, j]), float(gs[i]), float(bs[j]))
    if values.max() - values.min() <= 1e-15 * max(1.0, abs(values.min())):
        return best[1], best[2], best[0]

    f = _scalar_gb_objective(qdc_obs, rvc_obs, cc0, rvc0, rc, start_quarter, mask, l, y)
    # absolute fatol alone is unreachable once rounding noise in f exceeds it
    fatol = 1e-22 + 1e-14 * best[0]
    for i, j in starts:
        res = minimize(
            f, x0=np.array([gs[i], bs[j]]), method="Nelder-Mead",
            bounds=[G_BOUNDS, B_BOUNDS],
            options={"xatol": 1e-10, "fatol": fatol, "maxiter": 4000, "maxfev": 8000,
                     "initial_simplex": _initial_simplex(gs[i], bs[j])},
        )
        gx, bx = (float(np.clip(res.x[0], *G_BOUNDS)), float(np.clip(res.x[1], *B_BOUNDS)))
        fx = gb_objective(gx, bx, qdc_obs, rvc_obs, cc0, rvc0, rc, start_quarter, mask, l, y)
        if fx < best[0]:
            best = (fx, gx, bx)
    return best[1], best[2], best[0]


def _scalar_gb_objective(qdc_obs, rvc_obs, cc0, rvc0, rc, start_quarter, mask, l, y):
    """Plain-float version of :func:`gb_objective` for the simplex search,
    which evaluates one point at a time (numpy overhead dominates there)."""
    n = len(qdc_obs)
    qcc = [float(v) for v in _roll_contributions(np.array(rc), n, cc0)]
    w = [float(v) for v in _weights(mask, n)]
    age = [(start_quarter + i) / 4.0 / l for i in range(n)]
    obs_d = [float(v) for v in qdc_obs]
    obs_r = [float(v) for v in rvc_obs]

    def f(x):
        g, b = float(x[0]), float(x[1])
        growth = (1.0 + g) ** 0.25
        rvc = float(rvc0)
        sse = 0.0
        for i in range(n):
            rd = min(max(y, age[i] ** b), 1.0)
            grown = rvc * growth
            d = rd * grown / 4.0
            rvc = grown + qcc[i] - d
            sse += ((d - obs_d[i]) ** 2 + (rvc - obs_r[i]) ** 2) * w[i]
        return sse

    return f


def _grid_minima(values: np.ndarray, k: int) -> list:
    """Up to ``k`` grid cells no larger than any of their 8 neighbours, best
    first (row-major order on ties)."""
    n, m = values.shape
    pad = np.pad(values, 1, constant_values=np.inf)
    neighbours = np.min([pad[1 + di:1 + di + n, 1 + dj:1 + dj + m]
                         for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)], axis=0)
    idx = np.flatnonzero((values <= neighbours).ravel())
    idx = idx[np.argsort(values.ravel()[idx], kind="stable")][:k]
    return [divmod(int(v), m) for v in idx]


def _initial_simplex(g0: float, b0: float) -> np.ndarray:
    # one grid cell wide, pointing into the feasible box
    dg = (G_BOUNDS[1] - G_BOUNDS[0]) / (GRID_GB - 1)
    db = (B_BOUNDS[1] - B_BOUNDS[0]) / (GRID_GB - 1)
    g1 = g0 + dg if g0 + dg <= G_BOUNDS[1] else g0 - dg
    b1 = b0 + db if b0 + db <= B_BOUNDS[1] else b0 - db
    return np.array([[g0, b0], [g1, b0], [g0, b1]])


@dataclass(frozen=True)
class Calibration:
    rc: float
    g: float
    b: float
    objective: float

    def params(self, l: float = DEFAULT_LIFE, y: float = 0.0) -> YaleParams:
        return YaleParams(self.rc, self.g, self.b, l, y)


def calibrate_window(flows, cc0: float, rvc0: float, start_quarter: int, mask=None,
                     l: float = DEFAULT_LIFE, y: float = 0.0) -> Calibration:
    """Calibrate (RC, G, B) on a ``(n, 3)`` block of qCC, qDC, RVC observations
    whose first row is period ``start_quarter``, starting from (cc0, rvc0)."""
    flows = np.asarray(flows, dtype=float)
    cc0 = min(cc0, 1.0)
    rc = calibrate_rc(flows[:, 0], cc0, mask)
    g, b, obj = calibrate_gb(flows[:, 1], flows[:, 2], cc0, rvc0, rc, start_quarter, mask, l, y)
    obj += rc_objective(rc, flows[:, 0], cc0, mask)
    return Calibration(rc, g, b, float(obj))
