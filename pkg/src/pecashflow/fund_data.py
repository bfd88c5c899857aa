"""Fund records and the ratio transforms between reported percentages and
commitment fractions.

Reported quantities (Preqin style):

* ``called_pct``  cumulative contributions / commitment * 100
* ``dpi_pct``     cumulative distributions / cumulative contributions * 100
* ``rvpi_pct``    NAV / cumulative contributions * 100

Model space keeps everything as fractions of commitment:

* ``cc  = called / 100``
* ``dc  = dpi * called / 10000``
* ``rvc = rvpi * called / 10000``
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

CC_WARN_LIMIT = 1.2
# decreases this small are rounding from the percent round trip, not data
ROUNDING_SLACK = 1e-12


class FundDataError(ValueError):
    """Raised for invalid fund records or ratio series."""


@dataclass(frozen=True)
class Quarter:
    index: int
    called_pct: Optional[float]
    dpi_pct: Optional[float]
    rvpi_pct: Optional[float]

    def values(self) -> tuple:
        return (self.called_pct, self.dpi_pct, self.rvpi_pct)


@dataclass(frozen=True)
class FundRecord:
    fund_id: str
    vintage_year: int
    commitment: float
    quarters: tuple

    def __post_init__(self):
        object.__setattr__(self, "quarters", tuple(self.quarters))
        if not self.commitment > 0:
            raise FundDataError(f"fund {self.fund_id}: commitment must be > 0, got {self.commitment}")
        for expected, q in enumerate(self.quarters):
            if q.index != expected:
                raise FundDataError(
                    f"fund {self.fund_id}: quarter indices must run 0,1,2,... (found {q.index} at position {expected})"
                )
            for name, v in zip(("called_pct", "dpi_pct", "rvpi_pct"), q.values()):
                if v is None:
                    continue
                if not math.isfinite(v) or v < 0:
                    raise FundDataError(f"fund {self.fund_id}: {name} at quarter {q.index} must be finite and >= 0, got {v}")

    def __len__(self) -> int:
        return len(self.quarters)

    def series(self, name: str) -> list:
        """One reported series as a list with ``None`` for missing entries."""
        return [getattr(q, name) for q in self.quarters]

    def with_series(self, called, dpi, rvpi) -> "FundRecord":
        quarters = [Quarter(i, c, d, r) for i, (c, d, r) in enumerate(zip(called, dpi, rvpi))]
        return FundRecord(self.fund_id, self.vintage_year, self.commitment, quarters)


SERIES_NAMES = ("called_pct", "dpi_pct", "rvpi_pct")


@dataclass(frozen=True)
class NormalizedSeries:
    """Cumulative contribution (cc), cumulative distribution (dc) and NAV (rvc)
    as fractions of commitment."""

    cc: np.ndarray
    dc: np.ndarray
    rvc: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=float) for a in (self.cc, self.dc, self.rvc)]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise FundDataError("cc, dc and rvc must be 1-D arrays of equal length")
        for name, a in zip(("cc", "dc", "rvc"), arrays):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return len(self.cc)


@dataclass(frozen=True)
class QuarterlyFlows:
    """Per-quarter contribution (qcc), distribution (qdc) and NAV (rvc)."""

    qcc: np.ndarray
    qdc: np.ndarray
    rvc: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=float) for a in (self.qcc, self.qdc, self.rvc)]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise FundDataError("qcc, qdc and rvc must be 1-D arrays of equal length")
        for name, a in zip(("qcc", "qdc", "rvc"), arrays):
            if np.any(a < 0):
                i = int(np.argmax(a < 0))
                raise FundDataError(f"{name} is negative at quarter {i}: {a[i]}")
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return len(self.qcc)

    def as_matrix(self) -> np.ndarray:
        """(T, 3) matrix with columns qcc, qdc, rvc."""
        return np.column_stack([self.qcc, self.qdc, self.rvc])


def to_normalized(record: FundRecord) -> NormalizedSeries:
    n = len(record)
    cc = np.empty(n)
    dc = np.empty(n)
    rvc = np.empty(n)
    for q in record.quarters:
        if any(v is None for v in q.values()):
            raise FundDataError(f"fund {record.fund_id}: missing value at quarter {q.index}; impute first")
        called, dpi, rvpi = q.values()
        cc[q.index] = called / 100.0
        dc[q.index] = dpi * called / 10000.0
        rvc[q.index] = rvpi * called / 10000.0
    if n and cc.max() > CC_WARN_LIMIT:
        warnings.warn(
            f"fund {record.fund_id}: called capital reaches {cc.max():.3f} of commitment (> {CC_WARN_LIMIT})",
            stacklevel=2,
        )
    return NormalizedSeries(cc, dc, rvc)


def from_normalized(series: NormalizedSeries) -> tuple:
    """Invert :func:`to_normalized`; returns (called_pct, dpi_pct, rvpi_pct) arrays.

    DPI and RVPI are undefined before the first call; they are reported as 0.
    """
    cc = np.asarray(series.cc)
    called = cc * 100.0
    with np.errstate(divide="ignore", invalid="ignore"):
        dpi = np.where(cc > 0, np.asarray(series.dc) / cc * 100.0, 0.0)
        rvpi = np.where(cc > 0, np.asarray(series.rvc) / cc * 100.0, 0.0)
    return called, dpi, rvpi


def repair_cumulative(series: NormalizedSeries) -> NormalizedSeries:
    """Clamp cc and dc to their running maximum and floor rvc at zero."""
    return NormalizedSeries(
        np.maximum.accumulate(np.maximum(series.cc, 0.0)),
        np.maximum.accumulate(np.maximum(series.dc, 0.0)),
        np.maximum(series.rvc, 0.0),
    )


def _first_differences(x: np.ndarray, name: str) -> np.ndarray:
    d = np.diff(x, prepend=0.0)
    d[(d < 0) & (d > -ROUNDING_SLACK)] = 0.0
    if np.any(d < 0):
        i = int(np.argmax(d < 0))
        raise FundDataError(f"cumulative series {name} decreases at quarter {i} ({x[i - 1] if i else 0.0} -> {x[i]})")
    return d


def to_quarterly_flows(s: NormalizedSeries) -> QuarterlyFlows:
    return QuarterlyFlows(_first_differences(s.cc, "cc"), _first_differences(s.dc, "dc"), s.rvc.copy())


def to_cumulative(f: QuarterlyFlows) -> NormalizedSeries:
    return NormalizedSeries(np.cumsum(f.qcc), np.cumsum(f.qdc), f.rvc.copy())


def scale_to_currency(f: QuarterlyFlows, commitment: float) -> dict:
    """Per-quarter currency amounts for each flow."""
    if not commitment > 0:
        raise FundDataError(f"commitment must be > 0, got {commitment}")
    return {name: getattr(f, name) * commitment for name in ("qcc", "qdc", "rvc")}


def record_from_arrays(
    fund_id: str,
    vintage_year: int,
    commitment: float,
    called: Sequence,
    dpi: Sequence,
    rvpi: Sequence,
) -> FundRecord:
    def _clean(v):
        if v is None:
            return None
        v = float(v)
        return None if math.isnan(v) else v

    quarters = [Quarter(i, _clean(c), _clean(d), _clean(r)) for i, (c, d, r) in enumerate(zip(called, dpi, rvpi))]
    return FundRecord(str(fund_id), int(vintage_year), float(commitment), quarters)


@dataclass(frozen=True)
class FundSeries:
    """A fund's model-space flows, ready for padding and windowing.

    ``mask`` marks real (unpadded) quarters. ``extra`` holds optional
    per-quarter feature columns (macro features) aligned to the flows.
    """

    fund_id: str
    vintage_year: int
    commitment: float
    flows: QuarterlyFlows
    mask: np.ndarray = None
    extra: np.ndarray = None
    extra_names: tuple = ()

    def __post_init__(self):
        n = len(self.flows)
        mask = np.ones(n, dtype=bool) if self.mask is None else np.asarray(self.mask, dtype=bool)
        if mask.shape != (n,):
            raise FundDataError(f"fund {self.fund_id}: mask length {mask.shape} != {n}")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        if self.extra is not None:
            extra = np.asarray(self.extra, dtype=float)
            if extra.ndim != 2 or extra.shape[0] != n or extra.shape[1] != len(self.extra_names):
                raise FundDataError(f"fund {self.fund_id}: extra features shape {extra.shape} inconsistent")
            extra.setflags(write=False)
            object.__setattr__(self, "extra", extra)
        object.__setattr__(self, "extra_names", tuple(self.extra_names))

    def __len__(self) -> int:
        return len(self.flows)
