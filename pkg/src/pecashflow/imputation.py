"""Missing-value filtering, cubic-spline gap filling and per-vintage padding."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .fund_data import (
    SERIES_NAMES,
    FundDataError,
    FundRecord,
    FundSeries,
    QuarterlyFlows,
    repair_cumulative,
    to_normalized,
    to_quarterly_flows,
)

DEFAULT_THRESHOLD = 0.30
# below this many knots a natural spline is replaced by straight lines
MIN_SPLINE_KNOTS = 4


@dataclass
class ImputationReport:
    fund_id: str
    missing_fractions: tuple
    removed: bool
    filled_indices: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "fund_id": self.fund_id,
            "missing_fractions": [float(f) for f in self.missing_fractions],
            "removed": bool(self.removed),
            "filled_indices": [int(i) for i in self.filled_indices],
        }


def _as_float_array(series) -> np.ndarray:
    return np.array([np.nan if v is None else float(v) for v in series], dtype=float)


def missing_fraction(series) -> float:
    x = _as_float_array(series)
    if x.size == 0:
        raise FundDataError("missing_fraction of an empty series")
    return float(np.isnan(x).sum() / x.size)


def fund_missing_fractions(record: FundRecord) -> tuple:
    return tuple(missing_fraction(record.series(name)) for name in SERIES_NAMES)


def filter_funds(dataset, threshold: float = DEFAULT_THRESHOLD):
    """Drop funds where any reported series has ``>= threshold`` missing.

    Returns ``(kept, reports)``; a report is produced for every input fund.
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    kept, reports = [], []
    for rec in dataset:
        fractions = fund_missing_fractions(rec)
        removed = max(fractions) >= threshold
        reports.append(ImputationReport(rec.fund_id, fractions, removed))
        if not removed:
            kept.append(rec)
    return kept, reports


def cubic_interpolate(series) -> np.ndarray:
    """Fill missing entries of a 1-D series.

    Interior gaps use a natural cubic spline through the observed points
    (straight lines when fewer than four points are observed). Leading gaps
    become 0 and trailing gaps carry the last observation forward. Observed
    entries are returned untouched and the result is floored at 0.
    """
    x = _as_float_array(series)
    observed = ~np.isnan(x)
    n_obs = int(observed.sum())
    if n_obs == 0:
        raise FundDataError("cannot interpolate an all-missing series")
    if n_obs < 2:
        raise FundDataError(f"need at least 2 observed points to interpolate, got {n_obs}")
    idx = np.arange(x.size)
    knots = idx[observed]
    out = x.copy()
    first, last = knots[0], knots[-1]
    interior = (~observed) & (idx > first) & (idx < last)
    if interior.any():
        if n_obs < MIN_SPLINE_KNOTS:
            out[interior] = np.interp(idx[interior], knots, x[observed])
        else:
            spline = CubicSpline(knots, x[observed], bc_type="natural")
            out[interior] = spline(idx[interior])
    out[:first] = 0.0
    out[last + 1:] = x[last]
    out[~observed] = np.maximum(out[~observed], 0.0)
    return out


def impute_record(record: FundRecord):
    """Interpolate all three reported series of one fund.

    Returns ``(complete_record, filled_indices)``. Called % is clamped to its
    running maximum; monotonicity of cumulative distributions is repaired later
    in commitment space (see :func:`record_to_flows`).
    """
    called = cubic_interpolate(record.series("called_pct"))
    called = np.maximum.accumulate(called)
    dpi = cubic_interpolate(record.series("dpi_pct"))
    rvpi = cubic_interpolate(record.series("rvpi_pct"))
    filled = sorted({
        q.index for q in record.quarters if any(v is None for v in q.values())
    })
    return record.with_series(called.tolist(), dpi.tolist(), rvpi.tolist()), filled


def record_to_flows(record: FundRecord) -> QuarterlyFlows:
    """Complete record -> quarterly flows, repairing cumulative monotonicity."""
    return to_quarterly_flows(repair_cumulative(to_normalized(record)))


def prepare_funds(dataset, threshold: float = DEFAULT_THRESHOLD):
    """Filter, impute and convert raw records into :class:`FundSeries`.

    Returns ``(series_list, reports)``.
    """
    kept, reports = filter_funds(dataset, threshold)
    by_id = {r.fund_id: r for r in reports}
    out = []
    for rec in kept:
        complete, filled = impute_record(rec)
        by_id[rec.fund_id].filled_indices = filled
        out.append(FundSeries(rec.fund_id, rec.vintage_year, rec.commitment, record_to_flows(complete)))
    return out, reports


def _pad(fund: FundSeries, length: int) -> FundSeries:
    n = len(fund)
    if n == length:
        return fund
    extra_q = length - n
    f = fund.flows
    last_rvc = f.rvc[-1] if n else 0.0
    flows = QuarterlyFlows(
        np.concatenate([f.qcc, np.zeros(extra_q)]),
        np.concatenate([f.qdc, np.zeros(extra_q)]),
        np.concatenate([f.rvc, np.full(extra_q, last_rvc)]),
    )
    mask = np.concatenate([fund.mask, np.zeros(extra_q, dtype=bool)])
    extra = None
    if fund.extra is not None:
        # padded quarters keep the last feature row
        extra = np.vstack([fund.extra, np.repeat(fund.extra[-1:], extra_q, axis=0)])
    return FundSeries(fund.fund_id, fund.vintage_year, fund.commitment, flows, mask, extra, fund.extra_names)


def vintage_lengths(dataset) -> dict:
    lengths = defaultdict(int)
    for fund in dataset:
        lengths[fund.vintage_year] = max(lengths[fund.vintage_year], len(fund))
    return dict(lengths)


def pad_to_vintage_length(dataset) -> list:
    """Extend every fund to the longest series of its vintage.

    Padded quarters carry zero flows and the last NAV; their mask entries are
    False.
    """
    lengths = vintage_lengths(dataset)
    return [_pad(fund, lengths[fund.vintage_year]) for fund in dataset]
