"""Minute prices to normalized volatility, and daily log returns."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DegenerateSeriesError, TickFormatError
from .ingest import MinuteSeries

VOLATILITY_COLUMNS = ["symbol", "global_minute_index", "volatility"]


@dataclass
class VolatilitySeries:
    """Concatenated per-minute volatility in units of its standard deviation.

    ``day_boundaries`` holds the index at which each trading day starts.
    Series loaded from CSV (e.g. synthetic signals) may carry negative
    values; only :func:`normalize_volatility` guarantees ``values >= 0``.
    """

    symbol: str
    values: np.ndarray
    day_boundaries: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64))

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.day_boundaries = np.asarray(self.day_boundaries, dtype=np.int64)

    def __len__(self):
        return len(self.values)


@dataclass
class IntradayPattern:
    slot_means: np.ndarray  # mean |r| per minute-of-day slot, 389 entries


@dataclass
class DailySeries:
    symbol: str
    daily_returns: np.ndarray


def log_returns(minute: MinuteSeries) -> np.ndarray:
    """Per-day minute log returns, shape (days, 389); never spans overnight."""
    return np.diff(np.log(minute.prices), axis=1)


def intraday_pattern(per_day_returns: np.ndarray) -> IntradayPattern:
    r = np.atleast_2d(per_day_returns)
    if r.shape[0] < 1:
        raise ValueError("need at least one day of returns")
    return IntradayPattern(np.abs(r).mean(axis=0))


def normalize_volatility(per_day_returns: np.ndarray, pattern: IntradayPattern,
                         symbol: str = "") -> VolatilitySeries:
    """Divide |r| by the slot's mean |r|, concatenate days, scale to unit std.

    Slots whose pattern mean is zero map to volatility 0.
    """
    r = np.abs(np.atleast_2d(per_day_returns))
    means = pattern.slot_means
    safe = np.where(means > 0, means, 1.0)
    raw = np.where(means > 0, r / safe, 0.0)
    values = raw.ravel()
    sd = values.std(ddof=1) if values.size > 1 else 0.0
    # rounding noise on a constant series is not variance
    if not sd > 1e-12 * np.abs(values).max():
        raise DegenerateSeriesError(f"{symbol or 'series'}: volatility has zero variance")
    bounds = np.arange(r.shape[0], dtype=np.int64) * r.shape[1]
    return VolatilitySeries(symbol, values / sd, bounds)


def volatility_from_minutes(minute: MinuteSeries) -> VolatilitySeries:
    r = log_returns(minute)
    return normalize_volatility(r, intraday_pattern(r), minute.symbol)


def daily_series(minute: MinuteSeries) -> DailySeries:
    """Daily log returns from each day's final minute slot."""
    if minute.n_days < 2:
        raise ValueError(f"{minute.symbol}: need at least 2 days for daily returns")
    closes = minute.prices[:, -1]
    return DailySeries(minute.symbol, np.diff(np.log(closes)))


def write_volatility_csv(series_set, path) -> None:
    frames = [
        pd.DataFrame({
            "symbol": np.repeat(s.symbol, len(s)),
            "global_minute_index": np.arange(len(s)),
            "volatility": s.values,
        })
        for s in series_set
    ]
    df = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=VOLATILITY_COLUMNS)
    df.to_csv(path, index=False)


def read_volatility_csv(path) -> list[VolatilitySeries]:
    df = pd.read_csv(path, dtype={"symbol": str}, float_precision="round_trip")
    if [c.strip() for c in df.columns] != VOLATILITY_COLUMNS:
        raise TickFormatError(f"volatility header must be {','.join(VOLATILITY_COLUMNS)}")
    out = []
    for sym, g in df.groupby("symbol", sort=True):
        g = g.sort_values("global_minute_index", kind="stable")
        out.append(VolatilitySeries(str(sym), g["volatility"].to_numpy(dtype=float)))
    return out
