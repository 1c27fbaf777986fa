"""Detrended fluctuation analysis."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass
class DfaResult:
    alpha: float
    scales: np.ndarray
    fluctuations: np.ndarray
    fit_range: tuple[int, int]
    detrend_order: int
    intercept: float = 0.0


def default_scales(n: int, min_scale: int = 10, n_scales: int = 20) -> np.ndarray:
    """About ``n_scales`` log-spaced window sizes from ``min_scale`` to n/8."""
    top = n // 8
    if top < min_scale:
        raise DomainError(f"series of length {n} too short for scales >= {min_scale}")
    return np.unique(np.round(np.geomspace(min_scale, top, n_scales)).astype(np.int64))


def _window_fluct(profile: np.ndarray, n: int, basis: np.ndarray) -> float:
    k = len(profile) // n
    head = profile[: k * n].reshape(k, n)
    tail = profile[len(profile) - k * n:].reshape(k, n)
    segs = np.concatenate([head, tail])
    segs = segs - segs.mean(axis=1, keepdims=True)
    resid = segs - (segs @ basis) @ basis.T
    return float(np.sqrt(np.mean(resid * resid)))


def dfa(series, scales=None, detrend_order: int = 2, fit_range=None) -> DfaResult:
    """DFA with polynomial detrending of order ``detrend_order``.

    Windows are laid from both ends of the profile so the remainder is not
    discarded; F(n) is the RMS residual over all windows of size n.
    """
    x = np.asarray(series, dtype=float)
    if detrend_order not in (1, 2):
        raise DomainError("detrend_order must be 1 or 2")
    scales = default_scales(len(x)) if scales is None else np.unique(np.asarray(scales, dtype=np.int64))
    if scales.min() < detrend_order + 2:
        raise DomainError(f"scales must be >= {detrend_order + 2}")
    if len(x) < 4 * scales.max():
        raise DomainError(f"series length {len(x)} < 4 x max scale {scales.max()}")
    profile = np.cumsum(x - x.mean())
    fl = np.empty(len(scales))
    for i, n in enumerate(scales):
        t = np.linspace(-1.0, 1.0, n)
        basis, _ = np.linalg.qr(np.vander(t, detrend_order + 1))
        fl[i] = _window_fluct(profile, int(n), basis)
    lo, hi = (int(scales[0]), int(scales[-1])) if fit_range is None else (int(fit_range[0]), int(fit_range[1]))
    sel = (scales >= lo) & (scales <= hi) & (fl > 0)
    if sel.sum() < 2:
        raise DomainError(f"fit range {lo}..{hi} holds fewer than 2 scales")
    slope, icpt = np.polyfit(np.log(scales[sel]), np.log(fl[sel]), 1)
    return DfaResult(float(slope), scales, fl, (lo, hi), detrend_order, float(icpt))


def gamma_from_alpha(alpha: float) -> float:
    """gamma = 2 (1 - alpha); meaningful for long-range correlated records."""
    if not 0.5 < alpha < 1.0:
        warnings.warn(f"alpha={alpha} outside (0.5, 1); gamma-alpha relation not asserted there",
                      stacklevel=2)
    return 2.0 * (1.0 - alpha)
