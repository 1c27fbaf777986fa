import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from return_intervals.errors import DomainError, InsufficientDataError
from return_intervals.intervals import IntervalSet, ScaledPdf, scaled_pdf
from return_intervals.scaling import (
    DEFAULT_Q_GRID, fit_delta, fit_se, fit_threshold, gamma_curve, golden_section, moment,
    moment_points, se_density, se_params, summarize,
)
from return_intervals.synth import sample_se_intervals


def quad_moments(gamma):
    """Norm and mean of the SE density, integrated over u = ln x."""
    a, c = se_params(gamma)

    def f(u, power):
        x = math.exp(u)
        return c * math.exp(-((a * x) ** gamma)) * x ** (1 + power)

    # e^{-100} is far below tolerance for both integrands
    lo, hi = -60.0, math.log(100.0 ** (1 / gamma) / a)
    norm = quad(f, lo, hi, args=(0,), epsabs=0, epsrel=1e-12, limit=400)[0]
    mean = quad(f, lo, hi, args=(1,), epsabs=0, epsrel=1e-12, limit=400)[0]
    return norm, mean


def test_se_params_examples():
    assert se_params(1.0) == pytest.approx((1.0, 1.0), rel=1e-12)
    assert se_params(0.5) == pytest.approx((6.0, 3.0), rel=1e-12)
    assert se_params(2.0) == pytest.approx((1 / math.sqrt(math.pi), 2 / math.pi), rel=1e-12)


@pytest.mark.parametrize("gamma", [0.5, 2.0])
def test_se_params_quadrature_oracle(gamma):
    norm, mean = quad_moments(gamma)
    assert norm == pytest.approx(1.0, abs=1e-9)
    assert mean == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 2.0))
def test_unit_norm_and_mean(gamma):
    norm, mean = quad_moments(gamma)
    assert abs(norm - 1) < 1e-6
    assert abs(mean - 1) < 1e-6


@pytest.mark.parametrize("gamma", [0.0, -0.5])
def test_se_params_domain(gamma):
    with pytest.raises(DomainError):
        se_params(gamma)


def exact_pdf(gamma, k=1.0):
    x = np.logspace(-1.5, math.log10(15.0), 50) * k
    return ScaledPdf(x, se_density(x / k, gamma) / k, np.full(50, 1000), np.gradient(x), 50_000)


@pytest.mark.parametrize("gamma", [0.3, 0.55, 1.0, 1.7])
def test_zero_noise_recovery(gamma):
    res = fit_se(exact_pdf(gamma))
    assert abs(res.gamma - gamma) < 1e-6
    assert res.valid and res.converged
    assert res.rms_error < 1e-6


def test_fit_se_inverse_cdf_sample():
    tau = sample_se_intervals(0.5, 100_000, seed=4)
    res = fit_se(scaled_pdf(IntervalSet.from_intervals(tau)))
    assert abs(res.gamma - 0.5) <= 0.03


def test_fit_se_exponential_oracle():
    tau = np.random.default_rng(9).exponential(3.0, size=100_000)
    res = fit_se(scaled_pdf(IntervalSet.from_intervals(tau)))
    assert abs(res.gamma - 1.0) <= 0.03
    assert res.valid


def test_fit_se_geometric_lattice():
    # geometric intervals are exactly the gamma = 1 lattice model
    k = np.random.default_rng(2).geometric(0.08, size=100_000)
    res = fit_se(scaled_pdf(IntervalSet.from_intervals(k)))
    assert abs(res.gamma - 1.0) <= 0.03
    assert res.valid


def test_fit_se_scale_consistent():
    tau = np.random.default_rng(5).geometric(0.1, size=20_000)
    g1 = fit_se(scaled_pdf(IntervalSet.from_intervals(tau))).gamma
    g3 = fit_se(scaled_pdf(IntervalSet.from_intervals(tau * 3))).gamma
    assert g1 == g3


def test_fit_se_needs_four_bins():
    pdf = ScaledPdf(np.array([0.5, 1.0, 2.0]), np.ones(3), np.full(3, 100), np.ones(3), 300)
    with pytest.raises(InsufficientDataError):
        fit_se(pdf)


def test_rms_threshold_decides_validity():
    pdf = exact_pdf(0.6)
    pdf.densities = pdf.densities * np.where(np.arange(50) % 2, 1.3, 0.7)
    res = fit_se(pdf)
    assert res.status == "outlier" and not res.valid
    assert res.rms_error > 0.10
    assert fit_se(pdf, rms_threshold=1.0).valid


def test_golden_section_parabola():
    x, fx = golden_section(lambda g: (g - 0.731) ** 2, 0.0, 2.0, tol=1e-10)
    assert x == pytest.approx(0.731, abs=1e-9)
    assert fx < 1e-18


def test_gamma_curve_flags_everything(white_2_20):
    vol = np.abs(white_2_20[:50_000])
    res = gamma_curve(vol, DEFAULT_Q_GRID)
    assert len(res) == 21
    counts = summarize(res)
    assert counts["attempted"] == 21
    assert counts["valid"] + counts["outlier"] + counts["insufficient"] == 21
    assert res[-1].status == "insufficient"


def test_fit_threshold_above_max():
    _, res = fit_threshold(np.array([0.1, 0.2, 0.3]), 5.0)
    assert res.status == "insufficient"
    assert not res.valid


def test_moment_examples():
    assert moment(IntervalSet.from_intervals([1, 3]), 2) == pytest.approx(math.sqrt(1.25), abs=0)
    assert moment(IntervalSet.from_intervals([5] * 9), 4) == 1.0
    with pytest.raises(InsufficientDataError):
        moment(IntervalSet.from_intervals([]), 2)


@given(st.lists(st.integers(1, 1000), min_size=1, max_size=200))
def test_first_moment_is_one(tau):
    assert moment(np.array(tau), 1) == pytest.approx(1.0, rel=1e-12)


@given(st.lists(st.integers(1, 1000), min_size=2, max_size=100))
def test_moments_increase_with_order(tau):
    mus = [moment(np.array(tau), m) for m in (1, 2, 4, 8)]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(mus, mus[1:]))


def test_moment_points_skip_small_sets():
    sets = [IntervalSet.from_intervals(np.arange(1, n + 1)) for n in (10, 60)]
    pts = moment_points(sets, 2)
    assert len(pts) == 1 and pts[0][0] == pytest.approx(30.5)


def test_fit_delta_exact_power_law():
    t = np.array([5.0, 12.0, 20.0, 40.0, 80.0, 100.0, 300.0])
    res = fit_delta(list(zip(t, t ** 0.1)))
    assert abs(res.delta - 0.1) < 1e-9
    assert res.n_fit == 5
    assert res.valid


def test_fit_delta_flat():
    res = fit_delta([(t, 1.7) for t in (11, 30, 90)])
    assert res.delta == pytest.approx(0.0, abs=1e-12)


def test_fit_delta_range_is_half_open():
    with pytest.raises(InsufficientDataError) as err:
        fit_delta([(10.0, 1.0), (50.0, 1.1), (100.0, 1.2), (101.0, 1.3)])
    assert err.value.count == 2


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(10.5, 100.0), st.floats(0.5, 5.0)), min_size=3, max_size=20,
                unique_by=lambda p: round(p[0], 3)),
       st.floats(0.01, 100.0))
def test_fit_delta_invariant_to_moment_scale(points, k):
    base = fit_delta(points)
    scaled = fit_delta([(t, mu * k) for t, mu in points])
    assert scaled.delta == pytest.approx(base.delta, abs=1e-7)
    assert scaled.rms_error == pytest.approx(base.rms_error, abs=1e-9)
