import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.integrate import quad

from return_intervals.dfa import dfa
from return_intervals.errors import DomainError
from return_intervals.scaling import se_density
from return_intervals.synth import (
    SynthSpec, generate, generate_correlated, magnitude, minute_prices, rng_for,
    sample_se_intervals, shuffle,
)


def test_spec_validation():
    with pytest.raises(DomainError):
        SynthSpec(3000, 0.8)
    with pytest.raises(DomainError):
        SynthSpec(2 ** 11, 0.8)
    with pytest.raises(DomainError):
        SynthSpec(2 ** 12, 1.2)
    with pytest.raises(DomainError):
        SynthSpec(2 ** 12, kind="pink")


def test_deterministic_per_seed():
    a = generate(SynthSpec(2 ** 14, 0.8, 5))
    b = generate(SynthSpec(2 ** 14, 0.8, 5))
    c = generate(SynthSpec(2 ** 14, 0.8, 6))
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("alpha", [0.5, 0.7, 1.0])
def test_standardized(alpha):
    x = generate_correlated(SynthSpec(2 ** 14, alpha, 1))
    assert abs(x.mean()) < 1e-12
    assert abs(x.var() - 1) < 1e-12


def test_white_noise_limit():
    x = generate_correlated(SynthSpec(2 ** 18, 0.5, 2))
    assert abs(dfa(x).alpha - 0.5) <= 0.03


def test_periodogram_slope():
    # regress log power on log frequency over the first two decades below Nyquist
    n, alpha = 2 ** 18, 0.8
    x = generate_correlated(SynthSpec(n, alpha, 8))
    f = np.fft.rfftfreq(n)[1:]
    p = np.abs(np.fft.rfft(x)[1:]) ** 2
    sel = (f > 1e-4) & (f < 1e-1)
    slope = np.polyfit(np.log(f[sel]), np.log(p[sel]), 1)[0]
    assert abs(slope + (2 * alpha - 1)) <= 0.1


def test_shuffle_is_permutation():
    x = generate_correlated(SynthSpec(2 ** 12, 0.9, 0))
    y = shuffle(x, 1)
    np.testing.assert_array_equal(np.sort(x), np.sort(y))
    assert not np.array_equal(x, y)
    np.testing.assert_array_equal(y, shuffle(x, 1))


def test_shuffle_destroys_correlation():
    x = shuffle(generate_correlated(SynthSpec(2 ** 18, 0.9, 0)), 3)
    assert abs(dfa(x).alpha - 0.5) <= 0.03


@pytest.mark.parametrize("gamma", [1.0, 2.0])
def test_se_sample_mean(gamma):
    n = 100_000
    assert abs(sample_se_intervals(gamma, n, 10).mean() - 1) < 3 / math.sqrt(n)


def test_exponential_ks():
    n = 50_000
    x = sample_se_intervals(1.0, n, 12)
    assert stats.kstest(x, "expon").statistic < 1.63 / math.sqrt(n)


@pytest.mark.parametrize("gamma", [0.2, 0.3, 0.7, 1.4])
def test_inverse_cdf_round_trip(gamma):
    # integrate the density independently up to each sample and recover u
    x = sample_se_intervals(gamma, 1000, 13)[:15]
    u = rng_for(13).random(1000)[:15]
    for xi, ui in zip(x, u):
        cdf = quad(lambda t: se_density(t, gamma), 0, xi, epsabs=1e-13, epsrel=1e-11, limit=200)[0]
        assert cdf == pytest.approx(ui, rel=1e-7, abs=1e-10)


def test_se_sampler_domain():
    with pytest.raises(DomainError):
        sample_se_intervals(0.1, 5000, 0)
    with pytest.raises(DomainError):
        sample_se_intervals(0.5, 999, 0)


def test_generate_dispatch():
    x = generate(SynthSpec(2000, seed=1, kind="se_intervals", gamma=0.5))
    assert x.shape == (2000,) and np.all(x > 0)
    assert generate(SynthSpec(2 ** 12, seed=1, kind="white_noise")).shape == (4096,)


def test_magnitude_unit_std():
    v = magnitude(generate_correlated(SynthSpec(2 ** 12, 0.7, 4)))
    assert np.all(v >= 0)
    assert v.std(ddof=1) == pytest.approx(1.0)


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 10), st.floats(1.0, 500.0))
def test_minute_prices_shape_and_continuity(n_days, start):
    x = generate_correlated(SynthSpec(2 ** 12, 0.7, n_days))
    p = minute_prices(x, n_days, start_price=start)
    assert p.shape == (n_days, 390)
    assert np.all(p > 0)
    assert p[0, 0] == pytest.approx(start)
    np.testing.assert_allclose(p[1:, 0], p[:-1, -1])
