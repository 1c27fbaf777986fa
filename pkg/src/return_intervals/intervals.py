"""Threshold-exceedance return intervals and their scaled density.

Intervals between events (values >= q) are counted in index units over
the concatenated series; day boundaries do not reset the count.

Integer-valued intervals are binned on their lattice: after dividing by
the common step, every bin edge sits on a half-integer so each bin holds
whole lattice points, and the bin width is the number of points it
spans. This keeps densities honest when the mean interval is only a few
steps. Float intervals use plain logarithmic bins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import InsufficientDataError

MIN_INTERVALS = 50
BINS_PER_DECADE = 20


@dataclass
class IntervalSet:
    symbol: str
    q: float
    intervals: np.ndarray
    mean_interval: float
    n_events: int

    @property
    def insufficient(self) -> bool:
        return len(self.intervals) == 0

    @property
    def is_integer(self) -> bool:
        return np.issubdtype(self.intervals.dtype, np.integer)

    def __len__(self):
        return len(self.intervals)

    @classmethod
    def from_intervals(cls, intervals, symbol: str = "", q: float = float("nan")) -> "IntervalSet":
        tau = np.asarray(intervals)
        if not np.issubdtype(tau.dtype, np.integer):
            tau = tau.astype(float)
        if np.any(tau <= 0):
            raise ValueError("intervals must be positive")
        mean = float(tau.mean()) if len(tau) else float("nan")
        return cls(symbol, q, tau, mean, len(tau) + 1 if len(tau) else 0)


@dataclass
class ScaledPdf:
    """Density of x = tau/<tau> on logarithmic bins (empty bins omitted).

    For lattice data ``lattice_bins`` holds the inclusive (first, last)
    lattice point of each bin and ``lattice_mean`` the mean interval in
    lattice steps; both are None for continuous data.
    """

    bin_centers: np.ndarray
    densities: np.ndarray
    bin_counts: np.ndarray
    bin_widths: np.ndarray
    n_intervals: int
    lattice_bins: np.ndarray | None = None
    lattice_mean: float | None = None

    @property
    def is_lattice(self) -> bool:
        return self.lattice_bins is not None

    def mass(self) -> float:
        return float(np.sum(self.densities * self.bin_widths))


def extract_intervals(vol, q: float, symbol: str | None = None) -> IntervalSet:
    """Return intervals between successive values >= q."""
    if not q > 0:
        raise ValueError("threshold q must be positive")
    values = getattr(vol, "values", vol)
    sym = symbol if symbol is not None else getattr(vol, "symbol", "")
    events = np.flatnonzero(np.asarray(values) >= q)
    if len(events) < 2:
        return IntervalSet(sym, q, np.zeros(0, dtype=np.int64), float("nan"), len(events))
    tau = np.diff(events).astype(np.int64)
    return IntervalSet(sym, q, tau, float(tau.mean()), len(events))


def _log_edges(lo: float, hi: float, bins_per_decade: int) -> np.ndarray:
    n = max(1, int(np.ceil(np.log10(hi / lo) * bins_per_decade - 1e-9)))
    edges = np.exp(np.linspace(np.log(lo), np.log(hi), n + 1))
    edges[0], edges[-1] = lo, hi  # exp(log(v)) may round past the data range
    return edges


def _continuous_pdf(tau: np.ndarray, bins_per_decade: int) -> ScaledPdf:
    x = tau / tau.mean()
    lo, hi = x.min(), x.max()
    if hi <= lo:
        half = 10 ** (0.5 / bins_per_decade)
        edges = np.array([lo / half, lo * half])
    else:
        edges = _log_edges(lo, hi, bins_per_decade)
    n_bins = len(edges) - 1
    # Bin in log-ratio space; the small snap keeps points sitting on an edge
    # (common for decimal-quantized data) in the same bin under rescaling.
    step = np.log(edges[-1] / edges[0]) / n_bins
    idx = np.floor(np.log(x / edges[0]) / step + 1e-9).astype(np.int64)
    counts = np.bincount(np.clip(idx, 0, n_bins - 1), minlength=n_bins)
    widths = np.diff(edges)
    keep = counts > 0
    centers = np.sqrt(edges[:-1] * edges[1:])
    dens = counts / (len(x) * widths)
    return ScaledPdf(centers[keep], dens[keep], counts[keep], widths[keep], len(x))


def _lattice_pdf(tau: np.ndarray, bins_per_decade: int) -> ScaledPdf:
    step = int(np.gcd.reduce(tau))
    k = tau // step
    mean = float(k.mean())
    lo, hi = int(k.min()), int(k.max())
    raw = _log_edges(lo - 0.5, hi + 0.5, bins_per_decade)
    inner = np.floor(raw[1:-1]) + 0.5
    edges = np.unique(np.concatenate([[lo - 0.5], inner, [hi + 0.5]]))
    edges = edges[(edges >= lo - 0.5) & (edges <= hi + 0.5)]
    counts, _ = np.histogram(k, edges)
    first = (edges[:-1] + 0.5).astype(np.int64)
    last = (edges[1:] - 0.5).astype(np.int64)
    n_points = last - first + 1
    widths = n_points / mean
    centers = 0.5 * (first + last) / mean
    dens = counts / (len(k) * widths)
    keep = counts > 0
    return ScaledPdf(centers[keep], dens[keep], counts[keep], widths[keep], len(k),
                     np.stack([first, last], axis=1)[keep], mean)


def scaled_pdf(iset: IntervalSet, bins_per_decade: int = BINS_PER_DECADE,
               min_intervals: int = MIN_INTERVALS) -> ScaledPdf:
    """Estimate f(x) for x = tau/<tau> with logarithmic bins."""
    n = len(iset.intervals)
    if n < min_intervals:
        raise InsufficientDataError(
            f"{iset.symbol} q={iset.q}: {n} intervals < {min_intervals}", count=n)
    if iset.is_integer:
        return _lattice_pdf(iset.intervals, bins_per_decade)
    return _continuous_pdf(np.asarray(iset.intervals, dtype=float), bins_per_decade)


def intervals_frame(isets) -> pd.DataFrame:
    rows = [pd.DataFrame({"symbol": s.symbol, "q": s.q, "tau": s.intervals}) for s in isets]
    return pd.concat(rows, ignore_index=True) if rows else pd.DataFrame(columns=["symbol", "q", "tau"])


def pdf_frame(symbol: str, q: float, pdf: ScaledPdf) -> pd.DataFrame:
    return pd.DataFrame({
        "symbol": symbol, "q": q, "x": pdf.bin_centers,
        "density": pdf.densities, "count": pdf.bin_counts,
    })
