"""Tick and minute-bar ingestion.

Ticks are sampled onto a fixed 390-slot session grid per trading day:
each slot takes the tick nearest its minute mark (within +/-30 s, ties to
the earlier tick); empty slots carry the previous slot's price forward.
"""

from __future__ import annotations

import datetime as _dt
import io
import logging
import os
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Sequence
from zoneinfo import ZoneInfo

import numpy as np
import pandas as pd

from .errors import MalformedDataError, TickFormatError

log = logging.getLogger(__name__)

SLOTS_PER_DAY = 390
MINUTE_MS = 60_000
WINDOW_MS = 30_000

TICK_COLUMNS = ["symbol", "timestamp", "price", "size"]
MINUTE_COLUMNS = ["symbol", "date", "minute_index", "price"]
CALENDAR_COLUMNS = ["date", "open_timestamp"]


@dataclass(frozen=True)
class TickRecord:
    symbol: str
    timestamp: int  # ms since epoch, UTC
    price: float
    size: int


@dataclass
class TickBatch:
    """Parsed ticks plus the number of rows rejected as malformed."""

    frame: pd.DataFrame
    n_malformed: int = 0

    @property
    def records(self) -> list[TickRecord]:
        return [
            TickRecord(s, int(t), float(p), int(z))
            for s, t, p, z in self.frame[TICK_COLUMNS].itertuples(index=False)
        ]

    def __len__(self):
        return len(self.frame)

    def symbols(self) -> list[str]:
        return sorted(self.frame["symbol"].unique())


@dataclass
class MinuteSeries:
    """Day x 390 matrix of minute prices for one symbol."""

    symbol: str
    days: list[str]
    prices: np.ndarray
    trades_per_day: np.ndarray | None = None

    def __post_init__(self):
        self.prices = np.asarray(self.prices, dtype=float)
        if self.prices.ndim != 2 or self.prices.shape[1] != SLOTS_PER_DAY:
            raise ValueError(
                f"{self.symbol}: prices must have shape (days, {SLOTS_PER_DAY}), "
                f"got {self.prices.shape}"
            )
        if len(self.days) != self.prices.shape[0]:
            raise ValueError(f"{self.symbol}: {len(self.days)} dates for {self.prices.shape[0]} rows")
        if not np.all(self.prices > 0):
            raise ValueError(f"{self.symbol}: prices must be positive")
        if any(a >= b for a, b in zip(self.days, self.days[1:])):
            raise ValueError(f"{self.symbol}: days must be strictly increasing")
        if self.trades_per_day is not None:
            self.trades_per_day = np.asarray(self.trades_per_day, dtype=np.int64)
            if self.trades_per_day.shape != (len(self.days),):
                raise ValueError(f"{self.symbol}: one trade count per day required")

    @property
    def n_days(self) -> int:
        return self.prices.shape[0]


@dataclass
class TradingCalendar:
    """Session opens (ms UTC) keyed by ISO date; every session is 390 minutes."""

    dates: list[str]
    opens: np.ndarray

    def __post_init__(self):
        self.opens = np.asarray(self.opens, dtype=np.int64)
        order = np.argsort(self.opens, kind="stable")
        self.opens = self.opens[order]
        self.dates = [self.dates[i] for i in order]

    def marks(self, i: int) -> np.ndarray:
        return self.opens[i] + MINUTE_MS * np.arange(SLOTS_PER_DAY, dtype=np.int64)


def _as_buffer(stream) -> io.BytesIO | BinaryIO:
    if isinstance(stream, (bytes, bytearray)):
        return io.BytesIO(bytes(stream))
    if isinstance(stream, (str, os.PathLike)):
        return open(stream, "rb")
    return stream


def parse_ticks(stream, fmt: str = "csv", max_malformed_fraction: float = 0.01) -> TickBatch:
    """Parse a tick CSV with header ``symbol,timestamp,price,size``.

    Rows with an empty symbol, a non-integral timestamp, a non-positive
    price or a negative/non-integral size are dropped and counted. More
    than ``max_malformed_fraction`` of such rows raises
    :class:`MalformedDataError`.
    """
    if fmt != "csv":
        raise TickFormatError(f"unsupported tick format {fmt!r}")
    raw = _as_buffer(stream).read()
    if not raw.strip():
        return TickBatch(pd.DataFrame({c: pd.Series(dtype=t) for c, t in
                                       zip(TICK_COLUMNS, ["object", "int64", "float64", "int64"])}))
    try:
        df = pd.read_csv(io.BytesIO(raw), dtype=str, keep_default_na=False,
                         skipinitialspace=True, on_bad_lines="skip")
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise TickFormatError(f"unreadable tick file: {exc}") from exc
    header = [c.strip().lower() for c in df.columns]
    if header != TICK_COLUMNS:
        raise TickFormatError(f"expected header {','.join(TICK_COLUMNS)}, got {','.join(df.columns)}")
    df.columns = header
    n_lines = sum(1 for line in raw.splitlines()[1:] if line.strip())

    sym = df["symbol"].str.strip()
    ts = pd.to_numeric(df["timestamp"], errors="coerce")
    px = pd.to_numeric(df["price"], errors="coerce")
    sz = pd.to_numeric(df["size"], errors="coerce")
    ok = (
        (sym != "")
        & ts.notna() & (ts == np.floor(ts)) & (ts >= 0)
        & px.notna() & np.isfinite(px) & (px > 0)
        & sz.notna() & (sz == np.floor(sz)) & (sz >= 0)
    )
    n_bad = n_lines - int(ok.sum())
    if n_lines and n_bad / n_lines > max_malformed_fraction:
        raise MalformedDataError(
            f"{n_bad} of {n_lines} tick rows malformed "
            f"(> {max_malformed_fraction:.0%}); wrong file?"
        )
    if n_bad:
        log.warning("dropped %d malformed tick rows", n_bad)
    out = pd.DataFrame({
        "symbol": sym[ok].to_numpy(),
        "timestamp": ts[ok].astype(np.int64).to_numpy(),
        "price": px[ok].astype(float).to_numpy(),
        "size": sz[ok].astype(np.int64).to_numpy(),
    })
    out = out.sort_values(["symbol", "timestamp"], kind="stable").reset_index(drop=True)
    return TickBatch(out, n_bad)


def read_calendar(path) -> TradingCalendar:
    df = pd.read_csv(path, dtype={"date": str})
    if [c.strip() for c in df.columns] != CALENDAR_COLUMNS:
        raise TickFormatError(f"calendar header must be {','.join(CALENDAR_COLUMNS)}")
    return TradingCalendar(list(df["date"]), df["open_timestamp"].astype(np.int64).to_numpy())


def default_calendar(timestamps: Iterable[int], tz: str = "America/New_York",
                     open_time: str = "09:30") -> TradingCalendar:
    """One 390-minute session per local date that has any tick.

    No exchange holidays are hardcoded; a date exists iff it traded.
    """
    zone = ZoneInfo(tz)
    hh, mm = (int(v) for v in open_time.split(":"))
    local_dates = sorted({
        _dt.datetime.fromtimestamp(t / 1000, tz=zone).date()
        for t in np.unique(np.asarray(list(timestamps), dtype=np.int64) // MINUTE_MS * MINUTE_MS)
    })
    opens = [
        int(_dt.datetime(d.year, d.month, d.day, hh, mm, tzinfo=zone).timestamp() * 1000)
        for d in local_dates
    ]
    return TradingCalendar([d.isoformat() for d in local_dates], np.array(opens, dtype=np.int64))


def _sample_day(ts: np.ndarray, px: np.ndarray, marks: np.ndarray) -> np.ndarray:
    # ts sorted; pick nearest tick per mark, earlier tick on ties
    n = len(ts)
    right = np.searchsorted(ts, marks, side="left")
    left = right - 1
    has_r = right < n
    has_l = left >= 0
    d_r = np.where(has_r, ts[np.minimum(right, n - 1)] - marks, np.iinfo(np.int64).max)
    d_l = np.where(has_l, marks - ts[np.maximum(left, 0)], np.iinfo(np.int64).max)
    use_left = d_l <= d_r
    # first of any run of identical timestamps on the left side
    left_first = np.searchsorted(ts, ts[np.maximum(left, 0)], side="left")
    pick = np.where(use_left, left_first, right)
    dist = np.minimum(d_l, d_r)
    out = np.full(len(marks), np.nan)
    hit = dist <= WINDOW_MS
    out[hit] = px[pick[hit]]
    if np.isnan(out[0]):
        out[0] = px[0]
    # carry forward
    idx = np.where(np.isnan(out), 0, np.arange(len(out)))
    np.maximum.accumulate(idx, out=idx)
    return out[idx]


def _build(symbol: str, ts: np.ndarray, px: np.ndarray, calendar: TradingCalendar) -> MinuteSeries:
    days, rows, counts = [], [], []
    lo = np.searchsorted(ts, calendar.opens - WINDOW_MS, side="left")
    hi = np.searchsorted(ts, calendar.opens + MINUTE_MS * (SLOTS_PER_DAY - 1) + WINDOW_MS, side="right")
    for i, date in enumerate(calendar.dates):
        a, b = lo[i], hi[i]
        if b <= a:
            log.warning("%s: no ticks on %s; day dropped", symbol, date)
            continue
        rows.append(_sample_day(ts[a:b], px[a:b], calendar.marks(i)))
        days.append(date)
        counts.append(b - a)
    prices = np.array(rows) if rows else np.empty((0, SLOTS_PER_DAY))
    return MinuteSeries(symbol, days, prices, np.array(counts, dtype=np.int64))


def build_minute_series(ticks: Sequence[TickRecord] | pd.DataFrame,
                        calendar: TradingCalendar | None = None) -> MinuteSeries:
    """Sample one symbol's sorted ticks onto the calendar's minute marks."""
    if isinstance(ticks, pd.DataFrame):
        frame = ticks
    else:
        frame = pd.DataFrame([(t.symbol, t.timestamp, t.price) for t in ticks],
                             columns=["symbol", "timestamp", "price"])
    symbols = frame["symbol"].unique()
    if len(symbols) != 1:
        raise ValueError(f"expected ticks for one symbol, got {len(symbols)}")
    frame = frame.sort_values("timestamp", kind="stable")
    ts = frame["timestamp"].to_numpy(dtype=np.int64)
    px = frame["price"].to_numpy(dtype=float)
    if calendar is None:
        calendar = default_calendar(ts)
    return _build(str(symbols[0]), ts, px, calendar)


def minute_series_from_ticks(batch: TickBatch, calendar: TradingCalendar | None = None) -> list[MinuteSeries]:
    if calendar is None and len(batch):
        calendar = default_calendar(batch.frame["timestamp"].to_numpy())
    return [build_minute_series(g, calendar) for _, g in batch.frame.groupby("symbol", sort=True)]


def filter_active_stocks(series_set: Iterable[MinuteSeries], min_daily_trades: int = 500) -> list[MinuteSeries]:
    """Keep symbols whose every day has at least ``min_daily_trades`` ticks.

    Series without trade counts (minute bars supplied directly) cannot be
    judged and are kept.
    """
    if min_daily_trades < 0:
        raise ValueError("min_daily_trades must be >= 0")
    kept = []
    for s in series_set:
        if s.trades_per_day is None:
            log.warning("%s: no trade counts; activity filter skipped", s.symbol)
            kept.append(s)
        elif s.n_days and int(s.trades_per_day.min()) >= min_daily_trades:
            kept.append(s)
        elif min_daily_trades == 0:
            kept.append(s)
    return kept


def write_minute_csv(series_set: Iterable[MinuteSeries], path) -> None:
    """Canonical minute-bar CSV; a ``trades`` column is added when counts are known."""
    series_set = list(series_set)
    with_trades = bool(series_set) and all(s.trades_per_day is not None for s in series_set)
    frames = []
    for s in series_set:
        n = s.n_days
        part = {
            "symbol": np.repeat(s.symbol, n * SLOTS_PER_DAY),
            "date": np.repeat(np.array(s.days, dtype=object), SLOTS_PER_DAY),
            "minute_index": np.tile(np.arange(SLOTS_PER_DAY), n),
            "price": s.prices.ravel(),
        }
        if with_trades:
            part["trades"] = np.repeat(s.trades_per_day, SLOTS_PER_DAY)
        frames.append(pd.DataFrame(part))
    cols = MINUTE_COLUMNS + (["trades"] if with_trades else [])
    df = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=cols)
    # repr-precision floats round-trip exactly
    df.to_csv(path, index=False, float_format=None)


def read_minute_csv(path) -> list[MinuteSeries]:
    df = pd.read_csv(path, dtype={"symbol": str, "date": str}, float_precision="round_trip")
    cols = [c.strip() for c in df.columns]
    if cols[:4] != MINUTE_COLUMNS or len(cols) > 5 or (len(cols) == 5 and cols[4] != "trades"):
        raise TickFormatError(f"minute-bar header must be {','.join(MINUTE_COLUMNS)}[,trades]")
    df.columns = cols
    out = []
    for sym, g in df.groupby("symbol", sort=True):
        g = g.sort_values(["date", "minute_index"], kind="stable")
        days = list(pd.unique(g["date"]))
        per_day = g.groupby("date", sort=True)["minute_index"].agg(list)
        expected = list(range(SLOTS_PER_DAY))
        for d, idx in per_day.items():
            if idx != expected:
                raise TickFormatError(f"{sym} {d}: minute_index must run 0..{SLOTS_PER_DAY - 1}")
        prices = g["price"].to_numpy(dtype=float).reshape(len(days), SLOTS_PER_DAY)
        trades = None
        if "trades" in g:
            trades = g["trades"].to_numpy(dtype=np.int64)[::SLOTS_PER_DAY]
        out.append(MinuteSeries(str(sym), days, prices, trades))
    return out
