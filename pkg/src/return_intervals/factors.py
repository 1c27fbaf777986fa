"""Per-stock factors, factor-binned exponent curves and delta-gamma regression."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DegenerateRegressorError, InsufficientDataError, TickFormatError
from .ingest import MinuteSeries
from .volatility import DailySeries

FACTORS = ("capitalization", "risk", "trades_per_day", "mean_return")
LOG_FACTORS = ("capitalization", "risk", "trades_per_day")
LOG_BINS = 12
LINEAR_BINS = 10
MIN_OCCUPANCY = 5
MIN_REGRESSION_PAIRS = 10
META_COLUMNS = ["symbol", "shares_outstanding", "ref_price", "ref_date"]


@dataclass
class StockMeta:
    symbol: str
    shares_outstanding: float
    ref_price: float
    ref_date: str = ""


@dataclass
class StockFactors:
    symbol: str
    capitalization: float | None
    risk: float
    mean_return: float
    trades_per_day: float | None

    def value(self, name: str) -> float | None:
        return getattr(self, name)


@dataclass
class FactorCurve:
    factor_name: str
    bin_centers: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    counts: np.ndarray
    fit_kind: str
    slope: float
    intercept: float
    bin_edges: np.ndarray = field(default=None, repr=False)

    def trend(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.log(x) if self.fit_kind == "logarithmic" else x
        return self.slope * u + self.intercept


@dataclass
class DeltaGammaRegression:
    q: float
    m: float
    slope: float
    intercept: float
    residual_rms: float
    n_points: int


def read_metadata(path) -> dict[str, StockMeta]:
    df = pd.read_csv(path, dtype={"symbol": str, "ref_date": str})
    if [c.strip() for c in df.columns] != META_COLUMNS:
        raise TickFormatError(f"metadata header must be {','.join(META_COLUMNS)}")
    return {
        r.symbol: StockMeta(r.symbol, float(r.shares_outstanding), float(r.ref_price), str(r.ref_date))
        for r in df.itertuples(index=False)
    }


def compute_factors(daily: DailySeries, minute: MinuteSeries | None = None,
                    meta: StockMeta | None = None) -> StockFactors:
    r = np.asarray(daily.daily_returns, dtype=float)
    if r.size < 1:
        raise InsufficientDataError(f"{daily.symbol}: no daily returns", count=0)
    cap = meta.ref_price * meta.shares_outstanding if meta is not None else None
    risk = float(r.std(ddof=1)) if r.size > 1 else 0.0
    trades = None
    if minute is not None and minute.trades_per_day is not None:
        trades = float(np.mean(minute.trades_per_day))
    return StockFactors(daily.symbol, cap, risk, float(r.mean()), trades)


def fit_trend(centers, means, kind: str = "logarithmic") -> tuple[float, float]:
    """OLS of bin means on ln(center) (logarithmic) or center (linear)."""
    u = np.asarray(centers, dtype=float)
    if kind == "logarithmic":
        u = np.log(u)
    y = np.asarray(means, dtype=float)
    if len(u) < 2 or np.ptp(u) == 0:
        raise DegenerateRegressorError("need at least two distinct bin centers")
    slope, icpt = np.polyfit(u, y, 1)
    return float(slope), float(icpt)


def bin_and_aggregate(stocks, factor_name: str, n_bins: int | None = None,
                      min_occupancy: int = MIN_OCCUPANCY) -> FactorCurve:
    """Bin stocks by one factor and average their exponent per bin.

    ``stocks`` is an iterable of (StockFactors, exponent). Entries with a
    missing factor or exponent (or a non-positive value of a log-binned
    factor) do not contribute. Bins below ``min_occupancy`` are reported
    but excluded from the trend fit.
    """
    log_binned = factor_name in LOG_FACTORS
    pairs = []
    for f, e in stocks:
        v = f.value(factor_name)
        if v is None or e is None or not math.isfinite(v) or not math.isfinite(e):
            continue
        if log_binned and v <= 0:
            continue
        pairs.append((float(v), float(e)))
    if not pairs:
        raise InsufficientDataError(f"no stocks with {factor_name} and a valid exponent", count=0)
    pairs.sort()
    v = np.array([p[0] for p in pairs])
    e = np.array([p[1] for p in pairs])
    n_bins = n_bins or (LOG_BINS if log_binned else LINEAR_BINS)
    lo, hi = v.min(), v.max()
    if hi == lo:
        hi = lo * 1.001 if log_binned else lo + 1e-12
    if log_binned:
        edges = np.geomspace(lo, hi, n_bins + 1)
        centers = np.sqrt(edges[:-1] * edges[1:])
    else:
        edges = np.linspace(lo, hi, n_bins + 1)
        centers = 0.5 * (edges[:-1] + edges[1:])
    idx = np.clip(np.searchsorted(edges, v, side="right") - 1, 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=e, minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts
        sq = np.bincount(idx, weights=(e - means[idx]) ** 2, minlength=n_bins)
        stds = np.sqrt(sq / counts)
    ok = counts >= min_occupancy
    if not ok.any():
        raise InsufficientDataError(
            f"{factor_name}: every bin has fewer than {min_occupancy} stocks", count=int(counts.max()))
    kind = "logarithmic" if log_binned else "linear"
    if ok.sum() >= 2:
        slope, icpt = fit_trend(centers[ok], means[ok], kind)
    else:
        slope, icpt = float("nan"), float("nan")
    return FactorCurve(factor_name, centers, means, stds, counts, kind, slope, icpt, edges)


def regress_delta_gamma(pairs, q: float = float("nan"), m: float = float("nan")) -> DeltaGammaRegression:
    """OLS line delta = slope * gamma + intercept over (gamma, delta) pairs."""
    arr = np.asarray([(g, d) for g, d in pairs], dtype=float).reshape(-1, 2)
    if len(arr) < MIN_REGRESSION_PAIRS:
        raise InsufficientDataError(
            f"{len(arr)} (gamma, delta) pairs < {MIN_REGRESSION_PAIRS}", count=len(arr))
    g, d = arr[:, 0], arr[:, 1]
    if np.ptp(g) == 0:
        raise DegenerateRegressorError("gamma is constant; slope undefined")
    slope, icpt = np.polyfit(g, d, 1)
    resid = d - (slope * g + icpt)
    return DeltaGammaRegression(q, m, float(slope), float(icpt),
                                float(np.sqrt(np.mean(resid ** 2))), len(arr))
