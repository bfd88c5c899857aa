"""Synthetic fund datasets standing in for proprietary reported data.

Two generators:

* noisy quarterly Yale paths (the main oracle: noiseless funds reproduce the
  benchmark recursion exactly), and
* Buchner-style paths: a square-root mean-reverting contribution rate and a
  log-distribution process pulled towards a payout profile.
"""
from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .fund_data import FundRecord, NormalizedSeries, Quarter, from_normalized, record_from_arrays
from .yale import DEFAULT_LIFE, YaleParams, distribution_rate

DEFAULT_RANGES = {"rc": (0.1, 0.5), "g": (0.0, 0.25), "b": (1.0, 4.0)}
# last reported quarter of the synthetic panel: 2013 vintages get 31 quarters
DEFAULT_CUTOFF = (2020, 3)


def fund_rng(seed: int, fund_id: str) -> np.random.Generator:
    """Independent, platform-stable substream per (seed, fund_id)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(fund_id.encode("utf-8"))]))


def vintage_horizon(vintage: int, cutoff: tuple = DEFAULT_CUTOFF) -> int:
    """Quarters from vintage Q1 through the cutoff quarter inclusive."""
    year, quarter = cutoff
    return (year - vintage) * 4 + quarter


@dataclass
class GeneratorConfig:
    n_funds_per_vintage: dict
    param_ranges: dict = field(default_factory=lambda: dict(DEFAULT_RANGES))
    noise_sigma: float = 0.1
    seed: int = 0
    cutoff: tuple = DEFAULT_CUTOFF
    # a fund may stop reporting up to this many quarters before the cutoff
    length_jitter: int = 0
    commitment_range: tuple = (50e6, 1e9)

    def __post_init__(self):
        self.n_funds_per_vintage = {int(k): int(v) for k, v in self.n_funds_per_vintage.items()}
        if any(v < 1 for v in self.n_funds_per_vintage.values()):
            raise ValueError("every vintage needs at least one fund")
        bounds = {"rc": (0, 1), "g": (0, 1), "b": (0, 5)}
        for k, (lo, hi) in self.param_ranges.items():
            blo, bhi = bounds[k]
            if not blo <= lo <= hi <= bhi:
                raise ValueError(f"range for {k} must lie within [{blo}, {bhi}], got {(lo, hi)}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        self.cutoff = tuple(self.cutoff)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_funds_per_vintage"] = {str(k): v for k, v in self.n_funds_per_vintage.items()}
        d["param_ranges"] = {k: list(v) for k, v in self.param_ranges.items()}
        d["cutoff"] = list(self.cutoff)
        d["commitment_range"] = list(self.commitment_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        d["param_ranges"] = {k: tuple(v) for k, v in d.get("param_ranges", DEFAULT_RANGES).items()}
        for key in ("cutoff", "commitment_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def yale_flow_path(params: YaleParams, horizon: int, noise_sigma: float = 0.0, rng=None) -> np.ndarray:
    """Quarterly Yale recursion with mean-one lognormal noise on each flow.

    The noise enters inside the recursion, so later quarters see the noisy
    state and the NAV identity holds exactly on the emitted path. Returns
    ``(horizon, 3)`` columns qCC, qDC, RVC.
    """
    growth = (1.0 + params.g) ** 0.25
    rd = distribution_rate(np.arange(1, horizon + 1) / 4.0, params.b, params.l, params.y)
    if noise_sigma > 0:
        z = rng.standard_normal((horizon, 2))
        noise = np.exp(noise_sigma * z - 0.5 * noise_sigma ** 2)
    else:
        noise = np.ones((horizon, 2))
    out = np.empty((horizon, 3))
    cc, rvc = 0.0, 0.0
    for i in range(horizon):
        uncalled = max(params.cc_total - cc, 0.0)
        qcc = min(params.rc * uncalled / 4.0 * noise[i, 0], uncalled)
        grown = rvc * growth
        qdc = min(rd[i] * grown / 4.0 * noise[i, 1], grown + qcc)
        rvc = grown + qcc - qdc
        cc += qcc
        out[i] = (qcc, qdc, rvc)
    return out


def flows_to_record(fund_id: str, vintage: int, commitment: float, flows: np.ndarray) -> FundRecord:
    """Express (qCC, qDC, RVC) flows as reported Called / DPI / RVPI percentages."""
    series = NormalizedSeries(np.cumsum(flows[:, 0]), np.cumsum(flows[:, 1]), flows[:, 2])
    called, dpi, rvpi = from_normalized(series)
    return record_from_arrays(fund_id, vintage, commitment, called, dpi, rvpi)


def draw_params(ranges: dict, rng: np.random.Generator) -> YaleParams:
    vals = {k: float(rng.uniform(*ranges.get(k, DEFAULT_RANGES[k]))) for k in ("rc", "g", "b")}
    return YaleParams(vals["rc"], vals["g"], vals["b"], DEFAULT_LIFE, 0.0)


def gen_yale_fund(params: YaleParams, horizon: int, noise_sigma: float, seed: int, fund_id: str = "F0",
                  vintage: int = 2010, commitment: float = 100e6) -> FundRecord:
    rng = fund_rng(seed, fund_id)
    flows = yale_flow_path(params, horizon, noise_sigma, rng)
    return flows_to_record(fund_id, vintage, commitment, flows)


def fund_ids_for(config: GeneratorConfig) -> list:
    return [(v, f"V{v}-{j:03d}") for v in sorted(config.n_funds_per_vintage)
            for j in range(config.n_funds_per_vintage[v])]


def generate_yale_dataset(config: GeneratorConfig):
    """Returns ``(records, truth)``; ``truth`` maps fund_id to its YaleParams."""
    records, truth = [], {}
    for vintage, fid in fund_ids_for(config):
        rng = fund_rng(config.seed, fid)
        params = draw_params(config.param_ranges, rng)
        horizon = vintage_horizon(vintage, config.cutoff)
        if config.length_jitter:
            horizon -= int(rng.integers(0, config.length_jitter + 1))
        commitment = float(np.round(rng.uniform(*config.commitment_range), -3))
        flows = yale_flow_path(params, horizon, config.noise_sigma, rng)
        records.append(flows_to_record(fid, vintage, commitment, flows))
        truth[fid] = params
    return records, truth


# ---------------------------------------------------------------- Buchner-style processes

@dataclass(frozen=True)
class BuchnerParams:
    kappa: float = 3.0
    theta: float = 0.4
    sigma_delta: float = 0.4
    sigma_p: float = 0.3
    m: float = 1.6
    alpha: float = 2.0
    dt: float = 0.25
    delta0: Optional[float] = None
    # lognormal payout profile over fund age in years
    payout_median: float = 7.0
    payout_spread: float = 0.5

    def __post_init__(self):
        if self.kappa <= 0 or self.m <= 0 or self.alpha <= 0 or self.dt <= 0:
            raise ValueError("kappa, m, alpha and dt must be > 0")
        if self.theta < 0 or self.sigma_delta < 0 or self.sigma_p < 0:
            raise ValueError("theta and the volatilities must be >= 0")

    @property
    def start_rate(self) -> float:
        return self.theta if self.delta0 is None else self.delta0


def payout_shape(t_years, median: float = 7.0, spread: float = 0.5) -> np.ndarray:
    """Lognormal density in fund age; integrates to one over (0, inf)."""
    t = np.asarray(t_years, dtype=float)
    return np.exp(-(np.log(t) - np.log(median)) ** 2 / (2 * spread ** 2)) / (t * spread * np.sqrt(2 * np.pi))


def buchner_rate_paths(p: BuchnerParams, horizon: int, n_paths: int, rng) -> np.ndarray:
    """Full-truncation Euler paths of the square-root contribution rate,
    shape ``(n_paths, horizon + 1)``; column 0 is the start rate."""
    delta = np.empty((n_paths, horizon + 1))
    delta[:, 0] = p.start_rate
    z = rng.standard_normal((n_paths, horizon))
    sq = np.sqrt(p.dt)
    for i in range(horizon):
        pos = np.maximum(delta[:, i], 0.0)
        delta[:, i + 1] = delta[:, i] + p.kappa * (p.theta - pos) * p.dt + p.sigma_delta * np.sqrt(pos) * sq * z[:, i]
    return delta


def buchner_contribution_path(p: BuchnerParams, commitment: float, horizon: int, seed: int) -> np.ndarray:
    """Per-quarter contributions in currency: rate * undrawn * dt."""
    rng = np.random.default_rng(seed)
    delta = buchner_rate_paths(p, horizon, 1, rng)[0]
    out = np.empty(horizon)
    undrawn = float(commitment)
    for i in range(horizon):
        c = min(max(delta[i], 0.0) * undrawn * p.dt, undrawn)
        out[i] = c
        undrawn -= c
    return out


def buchner_distribution_path(p: BuchnerParams, commitment: float, horizon: int, seed: int) -> np.ndarray:
    """Per-quarter distributions in currency.

    ``ln p`` is an Euler-discretised Brownian motion whose drift pulls it
    towards ``ln(m * commitment * s(t))`` at speed ``alpha``; each quarter pays
    ``p * dt``. The path starts on the target.
    """
    rng = np.random.default_rng(seed)
    t_mid = (np.arange(horizon) + 0.5) * p.dt
    log_target = np.log(p.m * commitment * payout_shape(t_mid, p.payout_median, p.payout_spread))
    z = rng.standard_normal(horizon)
    log_p = np.empty(horizon)
    log_p[0] = log_target[0]
    for i in range(horizon - 1):
        drift = p.alpha * (log_target[i] - log_p[i])
        log_p[i + 1] = log_p[i] + drift * p.dt + p.sigma_p * np.sqrt(p.dt) * z[i]
    return np.maximum(np.exp(log_p) * p.dt, 0.0)


def gen_buchner_fund(p: BuchnerParams, horizon: int, seed: int, fund_id: str = "F0", vintage: int = 2010,
                     commitment: float = 100e6, growth: float = 0.08) -> FundRecord:
    """Buchner contributions and distributions with a NAV that compounds at
    ``growth`` per year; distributions are capped by the available NAV."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(fund_id.encode("utf-8"))])
    s_c, s_d = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
    contrib = buchner_contribution_path(p, commitment, horizon, s_c) / commitment
    dist = buchner_distribution_path(p, commitment, horizon, s_d) / commitment
    g = (1.0 + growth) ** 0.25
    flows = np.empty((horizon, 3))
    nav = 0.0
    for i in range(horizon):
        grown = nav * g
        d = min(dist[i], grown + contrib[i])
        nav = grown + contrib[i] - d
        flows[i] = (contrib[i], d, nav)
    return flows_to_record(fund_id, vintage, commitment, flows)


def generate_buchner_dataset(config: GeneratorConfig, params: BuchnerParams = BuchnerParams()) -> list:
    records = []
    for vintage, fid in fund_ids_for(config):
        rng = fund_rng(config.seed, fid)
        horizon = vintage_horizon(vintage, config.cutoff)
        if config.length_jitter:
            horizon -= int(rng.integers(0, config.length_jitter + 1))
        commitment = float(np.round(rng.uniform(*config.commitment_range), -3))
        growth = float(rng.uniform(*config.param_ranges.get("g", DEFAULT_RANGES["g"])))
        records.append(gen_buchner_fund(params, horizon, config.seed, fid, vintage, commitment, growth))
    return records


# ---------------------------------------------------------------- missingness

def inject_missing(dataset, rate: float, seed: int):
    """Blank interior entries of each reported series independently with
    probability ``rate``; the first and last quarter stay observed.

    Returns ``(records, masks)`` with ``masks[fund_id]`` a ``(T, 3)`` boolean
    array, True where a value was removed.
    """
    if not 0 <= rate < 1:
        raise ValueError(f"rate must lie in [0, 1), got {rate}")
    out, masks = [], {}
    for rec in dataset:
        rng = fund_rng(seed, rec.fund_id)
        n = len(rec)
        drop = rng.random((n, 3)) < rate
        drop[0] = drop[-1] = False
        quarters = []
        for q, d in zip(rec.quarters, drop):
            vals = [None if d[k] else v for k, v in enumerate(q.values())]
            quarters.append(Quarter(q.index, *vals))
        out.append(FundRecord(rec.fund_id, rec.vintage_year, rec.commitment, quarters))
        masks[rec.fund_id] = drop
    return out, masks


# ---------------------------------------------------------------- macro levels

# (start level, annual drift, annual volatility, mean reversion) of log levels
_MACRO_DYNAMICS = {
    "gdp": (10000.0, 0.04, 0.02, 0.0),
    "unemployment": (5.0, 0.0, 0.25, 0.5),
    "cpi": (170.0, 0.025, 0.01, 0.0),
    "effective_yield": (5.0, 0.0, 0.3, 0.4),
    "gold": (300.0, 0.06, 0.15, 0.0),
    "russell2000": (500.0, 0.07, 0.22, 0.0),
    "sp500": (1400.0, 0.06, 0.18, 0.0),
}


def gen_macro(start_year: int = 1995, end_year: int = 2021, seed: int = 0) -> dict:
    """Synthetic level series for the seven macro variables at their usual
    publication frequencies (quarterly, monthly or business-daily)."""
    import pandas as pd

    from .macro import DEFAULT_FREQUENCY, MACRO_NAMES, MacroSeries

    freq_code = {"quarterly": "QE", "monthly": "ME", "daily": "B"}
    steps_per_year = {"quarterly": 4, "monthly": 12, "daily": 252}
    out = {}
    for k, name in enumerate(MACRO_NAMES):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), k]))
        freq = DEFAULT_FREQUENCY[name]
        dates = pd.date_range(f"{start_year}-01-01", f"{end_year}-12-31", freq=freq_code[freq])
        level, drift, vol, mr = _MACRO_DYNAMICS[name]
        dt = 1.0 / steps_per_year[freq]
        x = np.empty(len(dates))
        log0 = np.log(level)
        cur = log0
        for i in range(len(dates)):
            x[i] = cur
            cur = cur + (drift - mr * (cur - log0 - drift * i * dt)) * dt + vol * np.sqrt(dt) * rng.standard_normal()
        out[name] = MacroSeries(name, freq, tuple(dates), tuple(np.round(np.exp(x), 6)))
    return out
