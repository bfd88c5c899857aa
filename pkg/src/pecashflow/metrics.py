"""Forecast error metrics and plot-data emission."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataio import atomic_write_text
from .nn.loss import weighted_mse

TARGETS = ("qcc", "qdc", "rvc")
CURVE_COLUMNS = ("quarter",) + tuple(f"{kind}_{t}" for t in TARGETS for kind in ("actual", "pred", "bench"))


class MetricsError(ValueError):
    pass


def _cell_mask(mask, shape):
    if mask is None:
        return np.ones(shape, dtype=bool)
    m = np.asarray(mask, dtype=bool)
    while m.ndim < len(shape):
        m = m[..., None]
    return np.broadcast_to(m, shape)


def mse(pred, actual, mask=None) -> float:
    """Mean squared residual over unmasked cells.

    ``mask`` may cover whole quarters (one axis short of ``pred``).
    """
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape:
        raise MetricsError(f"pred {pred.shape} and actual {actual.shape} differ")
    m = _cell_mask(mask, pred.shape)
    if not m.any():
        raise MetricsError("mask excludes every cell")
    return float(np.mean((pred[m] - actual[m]) ** 2))


def r_squared(pred, actual, mask=None) -> float:
    """1 - SS_res / SS_tot over unmasked cells."""
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape:
        raise MetricsError(f"pred {pred.shape} and actual {actual.shape} differ")
    m = _cell_mask(mask, pred.shape)
    a, p = actual[m], pred[m]
    ss_tot = float(np.sum((a - a.mean()) ** 2)) if a.size else 0.0
    if ss_tot == 0.0:
        raise MetricsError("actual values have zero variance; R^2 undefined")
    return 1.0 - float(np.sum((a - p) ** 2)) / ss_tot


def r_squared_per_target(pred, actual, mask=None) -> list:
    """R^2 of each target column; None where the column has zero variance."""
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    m = _cell_mask(mask, pred.shape)
    out = []
    for k in range(pred.shape[-1]):
        try:
            out.append(r_squared(pred[..., k], actual[..., k], m[..., k]))
        except MetricsError:
            out.append(None)
    return out


def score(pred, actual, mask, weights) -> dict:
    """Plain and window-weighted MSE plus per-target R^2 of (N, S, 3) forecasts."""
    return {
        "mse": mse(pred, actual, mask),
        "weighted_mse": weighted_mse(pred, actual, weights, mask),
        "r2": r_squared_per_target(pred, actual, mask),
    }


@dataclass
class MetricsReport:
    train_mse: float
    test_mse: float
    r2_per_target: list
    per_fund: list = field(default_factory=list)
    test_weighted_mse: float = None
    benchmark_test_mse: float = None
    benchmark_test_weighted_mse: float = None

    def __post_init__(self):
        for name in ("train_mse", "test_mse"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise MetricsError(f"{name} must be >= 0, got {v}")

    def to_dict(self) -> dict:
        return asdict(self)


def metrics_report(evaluation: dict, windows, train_mse: float = None) -> MetricsReport:
    """Collect a :class:`MetricsReport` from :func:`pipelines.evaluate` output."""
    pred, actual, mask = evaluation["predicted"], evaluation["actual"], evaluation["mask"]
    bench = evaluation.get("benchmark")
    per_fund = []
    for i, w in enumerate(windows):
        if not mask[i].any():
            continue
        row = {"fund_id": w.fund_id, "window_index": w.window_index, "mse_model": mse(pred[i], actual[i], mask[i])}
        row["mse_benchmark"] = None if bench is None else mse(bench[i], actual[i], mask[i])
        per_fund.append(row)
    m = evaluation["metrics"]
    bm = evaluation.get("benchmark_metrics") or {}
    return MetricsReport(train_mse, m["mse"], m["r2"], per_fund, m["weighted_mse"],
                         bm.get("mse"), bm.get("weighted_mse"))


def curve_rows(forecast: dict) -> list:
    """Rows of the per-window curve file; ``quarter`` counts from 1 within the
    prediction window."""
    actual = np.asarray(forecast["actual"], dtype=float)
    pred = np.asarray(forecast["predicted"], dtype=float)
    bench = forecast.get("benchmark")
    bench = np.full(actual.shape, np.nan) if bench is None else np.asarray(bench, dtype=float)
    rows = []
    for q in range(actual.shape[0]):
        row = [q + 1]
        for k in range(len(TARGETS)):
            row += [actual[q, k], pred[q, k], bench[q, k]]
        rows.append(row)
    return rows


def curves_csv(forecast: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVE_COLUMNS)
    for row in curve_rows(forecast):
        writer.writerow([row[0]] + ["" if np.isnan(v) else repr(float(v)) for v in row[1:]])
    return buf.getvalue()


def emit_curves(report: dict, out_dir) -> list:
    """Write one CSV per forecast window; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for f in report["forecasts"]:
        path = out_dir / f"{f['fund_id']}_w{int(f['window_index']):03d}.csv"
        atomic_write_text(path, curves_csv(f))
        paths.append(path)
    return paths


def read_curves(path) -> dict:
    """Parse a curve CSV back into arrays keyed by column name."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return {h: np.array([float(r[i]) if r[i] != "" else np.nan for r in rows]) for i, h in enumerate(header)}
