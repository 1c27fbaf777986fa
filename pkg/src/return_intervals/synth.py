"""Seeded synthetic series used as verification oracles.

All randomness comes from numpy's PCG64 bit generator seeded from the
SynthSpec seed, so the same SynthSpec always reproduces the same series.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincinv

from .errors import DomainError
from .scaling import se_params

RNG_NAME = "numpy.random.PCG64"
KINDS = ("correlated_gaussian", "white_noise", "se_intervals")


@dataclass(frozen=True)
class SynthSpec:
    length: int
    alpha_target: float = 0.5
    seed: int = 0
    kind: str = "correlated_gaussian"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown kind {self.kind!r}")
        if self.kind != "se_intervals":
            if self.length < 2 ** 12 or self.length & (self.length - 1):
                raise DomainError(f"length must be a power of two >= 4096, got {self.length}")
            if self.alpha_target > 1:
                raise DomainError(f"alpha_target must be <= 1, got {self.alpha_target}")


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _standardize(x: np.ndarray) -> np.ndarray:
    x = x - x.mean()
    x = x / x.std()
    # second pass pulls mean/variance to within rounding of 0 and 1
    x = x - x.mean()
    return x / x.std()


def white_noise(spec: SynthSpec) -> np.ndarray:
    return _standardize(rng_for(spec.seed).standard_normal(spec.length))


def generate_correlated(spec: SynthSpec) -> np.ndarray:
    """Fourier-filtered Gaussian noise with DFA exponent ``alpha_target``.

    The spectrum of i.i.d. Gaussian noise is reshaped by f^(-beta/2),
    beta = 2 alpha - 1; the zero-frequency amplitude is set to 0.
    """
    if spec.alpha_target > 1:
        raise DomainError(f"alpha_target must be <= 1, got {spec.alpha_target}")
    if spec.alpha_target <= 0.5:
        return white_noise(spec)
    n = spec.length
    beta = 2.0 * spec.alpha_target - 1.0
    z = rng_for(spec.seed).standard_normal(n)
    freqs = np.fft.rfftfreq(n)
    amp = np.zeros_like(freqs)
    amp[1:] = freqs[1:] ** (-beta / 2.0)
    return _standardize(np.fft.irfft(np.fft.rfft(z) * amp, n))


def shuffle(series, seed: int) -> np.ndarray:
    return rng_for(seed).permutation(np.asarray(series))


def sample_se_intervals(gamma: float, n: int, seed: int) -> np.ndarray:
    """Draw n scaled intervals from the unit-mean SE density.

    Inverse-CDF sampling: F(x) = P(1/gamma, (a x)^gamma), the regularized
    lower incomplete gamma function, inverted numerically by scipy.
    """
    if not 0.2 <= gamma <= 2.0:
        raise DomainError(f"gamma must lie in [0.2, 2], got {gamma}")
    if n < 1000:
        raise DomainError(f"n must be >= 1000, got {n}")
    a, _ = se_params(gamma)
    u = rng_for(seed).random(n)
    return gammaincinv(1.0 / gamma, u) ** (1.0 / gamma) / a


def generate(spec: SynthSpec) -> np.ndarray:
    if spec.kind == "correlated_gaussian":
        return generate_correlated(spec)
    if spec.kind == "white_noise":
        return white_noise(spec)
    if spec.gamma is None:
        raise DomainError("se_intervals needs gamma")
    return sample_se_intervals(spec.gamma, spec.length, spec.seed)


def magnitude(series) -> np.ndarray:
    """|x| scaled to unit standard deviation (threshold-on-magnitude option)."""
    v = np.abs(np.asarray(series, dtype=float))
    return v / v.std(ddof=1)


def minute_prices(signal, n_days: int, start_price: float = 50.0, scale: float = 1e-3,
                  u_shape: float = 1.5) -> np.ndarray:
    """Turn a signal into a (n_days, 390) positive price matrix.

    Minute returns are ``scale * signal`` modulated by a U-shaped
    minute-of-day profile, so the volatility pipeline has a pattern to
    remove. Consumes ``n_days * 389`` signal values.
    """
    slots = 389
    x = np.asarray(signal, dtype=float)[: n_days * slots].reshape(n_days, slots)
    s = np.linspace(-1.0, 1.0, slots)
    profile = 1.0 + u_shape * s ** 2
    r = scale * x * profile
    logp = np.log(start_price) + np.concatenate([np.zeros((n_days, 1)), np.cumsum(r, axis=1)], axis=1)
    # days start where the previous one closed
    logp += np.concatenate([[0.0], np.cumsum(logp[:-1, -1] - np.log(start_price))])[:, None]
    return np.exp(logp)
