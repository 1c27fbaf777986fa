"""Stretched-exponential scaling fits and moment multiscaling.

The scaling function is f(x) = c exp(-(a x)^gamma) with (a, c) fixed by
unit norm and unit mean, so gamma is the only free parameter.

For lattice data (integer intervals) the same two constraints are
imposed as sums over the lattice points k = 1, 2, ... rather than as
integrals: P(k) = exp(-(A k)^gamma) / Z with A chosen so the lattice mean
equals the observed mean interval. The continuous (a, c) are the limit
of this model as the mean interval grows; at small mean intervals the
continuous constraint would bias gamma upward (a geometric law scaled by
its own mean does not decay as exp(-x)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaincc, gammaln

from .errors import DomainError, InsufficientDataError
from .intervals import BINS_PER_DECADE, MIN_INTERVALS, IntervalSet, ScaledPdf, extract_intervals, scaled_pdf

DEFAULT_Q_GRID = tuple(round(1.0 + 0.25 * i, 2) for i in range(21))
DEFAULT_M_VALUES = (2.0, 4.0, 8.0, 16.0)
GAMMA_BOUNDS = (0.05, 2.0)
SE_RMS_THRESHOLD = 0.10
DELTA_RMS_THRESHOLD = 0.22
DELTA_RANGE = (10.0, 100.0)
X_MIN = 0.1
MIN_BIN_COUNT = 10
MIN_FIT_BINS = 4
MIN_DELTA_POINTS = 3

_LATTICE_TERMS = 2000
_GRID_POINTS = 40


def se_params(gamma: float) -> tuple[float, float]:
    """Return (a, c) giving the SE density unit norm and unit mean."""
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    lg1 = gammaln(1.0 + 1.0 / gamma)
    log_a = gammaln(2.0 / gamma) - math.log(gamma) - lg1
    a = math.exp(log_a)
    return a, math.exp(log_a - lg1)


def se_density(x, gamma: float) -> np.ndarray:
    a, c = se_params(gamma)
    return c * np.exp(-(a * np.asarray(x, dtype=float)) ** gamma)


@dataclass
class SeFitResult:
    symbol: str
    q: float
    gamma: float
    a: float
    c: float
    rms_error: float
    valid: bool
    status: str  # valid | outlier | insufficient
    converged: bool = True
    n_bins: int = 0
    n_intervals: int = 0
    mean_interval: float = float("nan")
    pdf: ScaledPdf | None = field(default=None, repr=False)

    @classmethod
    def insufficient(cls, symbol, q, n_intervals=0, mean_interval=float("nan"), pdf=None):
        nan = float("nan")
        return cls(symbol, q, nan, nan, nan, nan, False, "insufficient", False,
                   0, n_intervals, mean_interval, pdf)


@dataclass
class MomentScalingResult:
    symbol: str
    m: float
    points: list[tuple[float, float]]
    delta: float
    intercept: float
    rms_error: float
    valid: bool
    status: str
    n_fit: int = 0

    @classmethod
    def insufficient(cls, symbol, m, points):
        nan = float("nan")
        return cls(symbol, m, list(points), nan, nan, nan, False, "insufficient", 0)


def golden_section(fun, lo: float, hi: float, tol: float = 1e-9) -> tuple[float, float]:
    """Minimize a unimodal ``fun`` on [lo, hi]; returns (argmin, min)."""
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


def _log_sum(lw: np.ndarray, log_tail: float) -> float:
    top = max(float(lw.max()), log_tail)
    return top + math.log(np.exp(lw - top).sum() + math.exp(log_tail - top))


def _lattice_moments(log_A: float, gamma: float, k: np.ndarray) -> tuple[float, float]:
    """log Z and mean of P(k) ~ exp(-(A k)^gamma) on k >= 1."""
    lw = -np.exp(gamma * (log_A + np.log(k)))
    # tail beyond the explicit sum, midpoint-corrected integral
    s = math.exp(gamma * (log_A + math.log(k[-1] + 0.5)))
    with np.errstate(divide="ignore"):
        log_t0 = gammaln(1 / gamma) + np.log(gammaincc(1 / gamma, s)) - log_A - math.log(gamma)
        log_t1 = gammaln(2 / gamma) + np.log(gammaincc(2 / gamma, s)) - 2 * log_A - math.log(gamma)
    log_z = _log_sum(lw, float(log_t0))
    log_m = _log_sum(lw + np.log(k), float(log_t1))
    return log_z, math.exp(log_m - log_z)


def _lattice_scale(gamma: float, mean: float) -> tuple[float, float]:
    """Solve for log A so the lattice mean equals ``mean``; returns (log A, log Z)."""
    k = np.arange(1, _LATTICE_TERMS + 1, dtype=float)
    a_cont, _ = se_params(gamma)
    guess = math.log(a_cont / mean)

    def excess(log_A):
        return _lattice_moments(log_A, gamma, k)[1] - mean

    lo, hi = guess - 1.0, guess + 1.0
    for _ in range(60):
        if excess(lo) > 0:
            break
        lo -= 2.0
    for _ in range(60):
        if excess(hi) < 0:
            break
        hi += 2.0
    log_A = brentq(excess, lo, hi, xtol=1e-13, rtol=1e-13)
    return log_A, _lattice_moments(log_A, gamma, k)[0]


def _lattice_log_density(gamma: float, mean: float, bins: np.ndarray) -> np.ndarray:
    log_A, log_z = _lattice_scale(gamma, mean)
    kmax = int(bins[-1, 1])
    k = np.arange(1, kmax + 2, dtype=float)
    lw = -np.exp(gamma * (log_A + np.log(k)))
    idx = np.stack([bins[:, 0] - 1, bins[:, 1]], axis=1).ravel()
    seg = np.logaddexp.reduceat(lw, idx)[::2]
    n = bins[:, 1] - bins[:, 0] + 1
    return seg - np.log(n) - log_z + math.log(mean)


def _continuous_log_density(gamma: float, x: np.ndarray) -> np.ndarray:
    a, c = se_params(gamma)
    return math.log(c) - (a * x) ** gamma


def _usable_bins(pdf: ScaledPdf, x_min: float, min_count: int) -> np.ndarray:
    return (pdf.bin_centers >= x_min) & (pdf.bin_counts >= min_count) & (pdf.densities > 0)


def fit_se(pdf: ScaledPdf, x_min: float = X_MIN, *, min_count: int = MIN_BIN_COUNT,
           gamma_bounds: tuple[float, float] = GAMMA_BOUNDS,
           rms_threshold: float = SE_RMS_THRESHOLD, tol: float = 1e-9,
           symbol: str = "", q: float = float("nan"),
           mean_interval: float = float("nan")) -> SeFitResult:
    """Least-squares fit of gamma on ln(density) over bins with x >= x_min.

    A coarse grid over ``gamma_bounds`` locates the basin, golden-section
    search refines it to ``tol``. ``rms_error`` is the RMS of the relative
    density residuals (fit - emp)/emp on the same bins.
    """
    use = _usable_bins(pdf, x_min, min_count)
    n_use = int(use.sum())
    if n_use < MIN_FIT_BINS:
        raise InsufficientDataError(
            f"{symbol} q={q}: {n_use} usable bins < {MIN_FIT_BINS}", count=n_use)
    log_emp = np.log(pdf.densities[use])
    if pdf.is_lattice:
        bins = pdf.lattice_bins[use]
        mean = pdf.lattice_mean

        def log_model(g):
            return _lattice_log_density(g, mean, bins)
    else:
        x = pdf.bin_centers[use]

        def log_model(g):
            return _continuous_log_density(g, x)

    def sse(g):
        r = log_emp - log_model(g)
        v = float(np.dot(r, r))
        return v if math.isfinite(v) else math.inf

    glo, ghi = gamma_bounds
    grid = np.linspace(glo, ghi, _GRID_POINTS)
    vals = [sse(g) for g in grid]
    i = int(np.argmin(vals))
    gamma, best = golden_section(sse, grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)], tol)
    if vals[i] < best:
        gamma, best = float(grid[i]), vals[i]
    pinned = min(gamma - glo, ghi - gamma) < 10 * tol
    converged = math.isfinite(best) and not pinned

    model = np.exp(log_model(gamma))
    emp = pdf.densities[use]
    rms = float(np.sqrt(np.mean(((model - emp) / emp) ** 2)))
    a, c = se_params(gamma)
    valid = bool(converged and rms <= rms_threshold)
    return SeFitResult(symbol, q, float(gamma), a, c, rms, valid,
                       "valid" if valid else "outlier", converged, n_use,
                       pdf.n_intervals, mean_interval, pdf)


def fit_threshold(vol, q: float, *, bins_per_decade: int = BINS_PER_DECADE,
                  min_intervals: int = MIN_INTERVALS, **fit_kw) -> tuple[IntervalSet, SeFitResult]:
    """Extract intervals at ``q`` and fit them; insufficiency becomes a status."""
    iset = extract_intervals(vol, q)
    try:
        pdf = scaled_pdf(iset, bins_per_decade, min_intervals)
    except InsufficientDataError:
        return iset, SeFitResult.insufficient(iset.symbol, q, len(iset), iset.mean_interval)
    try:
        res = fit_se(pdf, symbol=iset.symbol, q=q, mean_interval=iset.mean_interval, **fit_kw)
    except InsufficientDataError:
        return iset, SeFitResult.insufficient(iset.symbol, q, len(iset), iset.mean_interval, pdf)
    return iset, res


def gamma_curve(vol, q_grid=DEFAULT_Q_GRID, **kw) -> list[SeFitResult]:
    """One fit per threshold; failures are flagged, never dropped."""
    return [fit_threshold(vol, q, **kw)[1] for q in q_grid]


def summarize(results) -> dict[str, int]:
    counts = {"attempted": 0, "valid": 0, "outlier": 0, "insufficient": 0}
    for r in results:
        counts["attempted"] += 1
        counts[r.status] += 1
    return counts


def moment(iset, m: float) -> float:
    """(mean of (tau/<tau>)^m)^(1/m)."""
    tau = np.asarray(getattr(iset, "intervals", iset), dtype=float)
    if tau.size == 0:
        raise InsufficientDataError("moment of an empty interval set", count=0)
    if not m > 0:
        raise DomainError(f"moment order must be positive, got {m}")
    x = tau / tau.mean()
    return float(np.mean(x ** m) ** (1.0 / m))


def moment_points(isets, m: float, min_intervals: int = MIN_INTERVALS) -> list[tuple[float, float]]:
    return [(s.mean_interval, moment(s, m)) for s in isets if len(s) >= min_intervals]


def fit_delta(points, range_low: float = DELTA_RANGE[0], range_high: float = DELTA_RANGE[1], *,
              rms_threshold: float = DELTA_RMS_THRESHOLD, symbol: str = "",
              m: float = float("nan")) -> MomentScalingResult:
    """Slope of ln mu_m against ln <tau> over range_low < <tau> <= range_high."""
    pts = [(float(t), float(mu)) for t, mu in points]
    adm = np.array([(t, mu) for t, mu in pts if range_low < t <= range_high and mu > 0])
    if len(adm) < MIN_DELTA_POINTS:
        raise InsufficientDataError(
            f"{symbol} m={m}: {len(adm)} points in ({range_low}, {range_high}] < {MIN_DELTA_POINTS}",
            count=len(adm))
    lx, ly = np.log(adm[:, 0]), np.log(adm[:, 1])
    design = np.column_stack([lx, np.ones_like(lx)])
    (slope, icpt), *_ = np.linalg.lstsq(design, ly, rcond=None)
    fit = np.exp(icpt + slope * lx)
    rms = float(np.sqrt(np.mean(((fit - adm[:, 1]) / adm[:, 1]) ** 2)))
    valid = rms <= rms_threshold
    return MomentScalingResult(symbol, m, pts, float(slope), float(icpt), rms, bool(valid),
                               "valid" if valid else "outlier", len(adm))
