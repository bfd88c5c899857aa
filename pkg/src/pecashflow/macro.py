"""Macroeconomic and market-index features: quarterly resampling, year-over-
year changes, alignment with fund quarters and stress scenarios."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

# fixed column order of the macro block in feature matrices
MACRO_NAMES = ("gdp", "unemployment", "cpi", "effective_yield", "gold", "russell2000", "sp500")
DEFAULT_FREQUENCY = {
    "gdp": "quarterly", "unemployment": "quarterly", "cpi": "monthly", "effective_yield": "daily",
    "gold": "daily", "russell2000": "daily", "sp500": "daily",
}
FREQUENCIES = ("daily", "monthly", "quarterly")


class MacroError(ValueError):
    pass


@dataclass(frozen=True)
class MacroSeries:
    name: str
    frequency: str
    dates: tuple
    values: tuple

    def __post_init__(self):
        if self.frequency not in FREQUENCIES:
            raise MacroError(f"{self.name}: unknown frequency {self.frequency!r}")
        dates = tuple(pd.Timestamp(d) for d in self.dates)
        values = tuple(float(v) for v in self.values)
        if len(dates) != len(values):
            raise MacroError(f"{self.name}: {len(dates)} dates but {len(values)} values")
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise MacroError(f"{self.name}: dates must be strictly increasing")
        if not all(np.isfinite(values)):
            raise MacroError(f"{self.name}: values must be finite")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def to_pandas(self) -> pd.Series:
        return pd.Series(self.values, index=pd.DatetimeIndex(self.dates), name=self.name)


def quarter_label(period: pd.Period) -> str:
    return f"{period.year}Q{period.quarter}"


def parse_quarter(label: str) -> pd.Period:
    try:
        return pd.Period(label.upper().replace("-", ""), freq="Q")
    except Exception as exc:  # pandas raises several types here
        raise MacroError(f"cannot parse quarter {label!r}; expected e.g. 2008Q3") from exc


def resample_quarterly(series: MacroSeries) -> pd.Series:
    """Last observation of each calendar quarter, indexed by quarterly Period.

    Every quarter between the first and last observation must hold at least
    one observation.
    """
    s = series.to_pandas()
    if s.empty:
        raise MacroError(f"{series.name}: no observations")
    periods = s.index.to_period("Q")
    q = s.groupby(periods).last()
    full = pd.period_range(q.index.min(), q.index.max(), freq="Q")
    missing = full.difference(q.index)
    if len(missing):
        raise MacroError(f"{series.name}: no observation in quarter {quarter_label(missing[0])}")
    q.name = series.name
    return q


def quarterly_series(name: str, q: pd.Series) -> MacroSeries:
    """Wrap a Period-indexed quarterly series back into a MacroSeries dated at
    each quarter's last day (so resampling it again is an identity)."""
    dates = [p.end_time.normalize() for p in q.index]
    return MacroSeries(name, "quarterly", tuple(dates), tuple(q.values))


def yoy_change(q: pd.Series) -> pd.Series:
    """``x[t] / x[t-4] - 1``; the first four quarters are dropped."""
    if len(q) < 5:
        raise MacroError(f"{q.name}: need at least 5 quarterly points for a year-over-year change, got {len(q)}")
    values = q.to_numpy(dtype=float)
    base = values[:-4]
    if np.any(base <= 0):
        i = int(np.argmax(base <= 0))
        raise MacroError(f"{q.name}: non-positive base value {base[i]} at {quarter_label(q.index[i])}")
    return pd.Series(values[4:] / base - 1.0, index=q.index[4:], name=q.name)


def macro_feature_table(macro: dict, names=MACRO_NAMES) -> pd.DataFrame:
    """Quarterly YoY features for ``names`` (columns in that order)."""
    missing = [n for n in names if n not in macro]
    if missing:
        raise MacroError(f"macro set lacks series {missing}")
    cols = {n: yoy_change(resample_quarterly(macro[n])) for n in names}
    return pd.DataFrame(cols)[list(names)]


def fund_quarter_periods(vintage_year: int, n_quarters: int) -> pd.PeriodIndex:
    """Quarter 0 of a fund is Q1 of its vintage year."""
    return pd.period_range(pd.Period(f"{vintage_year}Q1", freq="Q"), periods=n_quarters, freq="Q")


def align_features(vintage_year: int, n_quarters: int, table: pd.DataFrame) -> np.ndarray:
    """``(n_quarters, len(table.columns))`` macro rows for one fund."""
    periods = fund_quarter_periods(vintage_year, n_quarters)
    rows = table.reindex(periods)
    bad = rows.isna().any(axis=1).to_numpy()
    if bad.any():
        first = periods[int(np.argmax(bad))]
        raise MacroError(f"macro features do not cover fund quarter {quarter_label(first)}")
    return rows.to_numpy(dtype=float)


def attach_macro(dataset, table: pd.DataFrame) -> list:
    """Add macro feature columns to every FundSeries (after padding)."""
    from .fund_data import FundSeries

    names = tuple(table.columns)
    return [
        FundSeries(f.fund_id, f.vintage_year, f.commitment, f.flows, f.mask,
                   align_features(f.vintage_year, len(f), table), names)
        for f in dataset
    ]


# ---------------------------------------------------------------- stress

@dataclass(frozen=True)
class Shock:
    series: str
    factor: float
    start_quarter: str
    duration: int

    def __post_init__(self):
        if not self.factor > 0:
            raise MacroError(f"shock factor must be > 0, got {self.factor}")
        if self.duration < 1:
            raise MacroError(f"shock duration must be >= 1 quarter, got {self.duration}")
        parse_quarter(self.start_quarter)


@dataclass(frozen=True)
class StressScenario:
    name: str
    shocks: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {"name": self.name, "shocks": [s.__dict__.copy() for s in self.shocks]}

    @classmethod
    def from_dict(cls, d: dict) -> "StressScenario":
        return cls(d["name"], tuple(Shock(s["series"], float(s["factor"]), str(s["start_quarter"]), int(s["duration"]))
                                    for s in d.get("shocks", [])))


def load_scenario(path) -> StressScenario:
    with open(path, encoding="utf-8") as fh:
        return StressScenario.from_dict(json.load(fh))


def apply_stress(macro: dict, scenario: StressScenario) -> dict:
    """Multiply level observations inside each shock window by its factor.

    Returns a new dict; unshocked series are passed through as the same objects.
    """
    out = dict(macro)
    for shock in scenario.shocks:
        if shock.series not in out:
            raise MacroError(f"scenario {scenario.name!r} shocks unknown series {shock.series!r}")
        s = out[shock.series]
        start = parse_quarter(shock.start_quarter)
        end = start + (shock.duration - 1)
        periods = pd.DatetimeIndex(s.dates).to_period("Q")
        inside = (periods >= start) & (periods <= end)
        values = np.asarray(s.values, dtype=float)
        shocked = np.where(inside, values * shock.factor, values)
        out[shock.series] = replace(s, values=tuple(shocked))
    return out


# ---------------------------------------------------------------- files

def read_macro_csv(path, name: str = None, frequency: str = None) -> MacroSeries:
    """``date,value`` CSV with ISO-8601 dates; blank or '.' values are skipped
    (FRED marks holidays with '.')."""
    path = Path(path)
    name = name or path.stem
    dates, values = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["date", "value"]:
            raise MacroError(f"{path}: expected header date,value")
        for row in reader:
            if not row or row[1].strip() in ("", "."):
                continue
            dates.append(row[0].strip())
            values.append(float(row[1]))
    return MacroSeries(name, frequency or DEFAULT_FREQUENCY.get(name, "daily"), tuple(dates), tuple(values))


def load_macro_dir(path, names=MACRO_NAMES) -> dict:
    path = Path(path)
    return {n: read_macro_csv(path / f"{n}.csv", n) for n in names}


def macro_to_csv(series: MacroSeries) -> str:
    lines = ["date,value"] + [f"{d.date().isoformat()},{v!r}" for d, v in zip(series.dates, series.values)]
    return "\n".join(lines) + "\n"
