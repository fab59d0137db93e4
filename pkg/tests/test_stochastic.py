"""Distribution-layer checks against closed forms and slow quadrature oracles."""

import numpy as np
import pytest
from scipy import special

from netreserve.errors import DomainError
from netreserve.stochastic import (
    DeterministicChannel,
    EmpiricalDemand,
    LognormalDemand,
    PointMassDemand,
    RayleighChannel,
    channel_cdf,
    channel_pdf,
    expected_min,
    expected_min_derivative,
    expected_outage,
    ray_cdf,
    ray_outage,
    ray_outage_dt,
    scaled_exp1,
    shared_outage,
)

import reference_solvers as ref


# -- frozen spot values -------------------------------------------------------


def test_expected_min_lognormal_unit():
    val = expected_min(1.0, LognormalDemand(0.0, 1.0))
    assert val == pytest.approx(0.7615782918651234, abs=1e-10)


def test_lognormal_mean_closed_form():
    assert LognormalDemand(0.0, 1.0).mean() == pytest.approx(
        1.6487212707001282, abs=1e-15)


def test_rayleigh_cdf_unit_point():
    # 1 - exp(-(2^1 - 1)/1) = 1 - e^{ -1 }
    assert ray_cdf(1.0, 1.0, 1.0) == pytest.approx(0.6321205588285577, abs=1e-15)


def test_expected_outage_unit_point():
    val = expected_outage(1.0, 1.0, RayleighChannel(1.0))
    assert val == pytest.approx(0.3314233893460574, abs=1e-9)


# -- expected_min against the lognormal closed form ---------------------------


def test_expected_min_matches_closed_form(rng):
    for _ in range(60):
        eta = rng.uniform(-1.0, 3.0)
        sigma = rng.uniform(0.2, 2.5)
        d = LognormalDemand(eta, sigma)
        r = float(rng.uniform(0.05, 4.0) * d.mean())
        assert expected_min(r, d) == pytest.approx(
            ref.lognormal_expected_min(r, eta, sigma), abs=1e-6)


def test_expected_min_derivative_is_tail_probability(rng):
    d = LognormalDemand(0.5, 0.8)
    for _ in range(20):
        r = float(rng.uniform(0.1, 8.0))
        h = 1e-5 * max(r, 1.0)
        fd = (expected_min(r + h, d) - expected_min(r - h, d)) / (2 * h)
        assert expected_min_derivative(r, d) == pytest.approx(fd, abs=1e-5)


def test_expected_min_concave(rng):
    # second difference never positive beyond quadrature noise
    d = LognormalDemand(1.0, 0.6)
    h = 1e-3
    for r in rng.uniform(0.2, 10.0, size=25):
        second = (expected_min(r + h, d) - 2 * expected_min(r, d)
                  + expected_min(r - h, d))
        assert second <= 1e-7


def test_expected_min_point_mass_is_min():
    d = PointMassDemand(2.5)
    assert expected_min(1.0, d) == 1.0
    assert expected_min(2.5, d) == 2.5
    assert expected_min(7.0, d) == 2.5


def test_expected_min_rejects_negative_rate():
    with pytest.raises(DomainError):
        expected_min(-0.1, LognormalDemand(0.0, 1.0))


def test_expected_min_empirical_matches_trapezoid(rng):
    grid = np.linspace(0.0, 10.0, 2001)
    true = LognormalDemand(1.0, 0.5)
    emp = EmpiricalDemand(grid, true.pdf(grid))
    for r in (0.5, 2.0, 5.0):
        byhand = np.trapezoid(np.minimum(grid, r) * emp.pdf(grid), grid) \
            + r * (1.0 - emp.cdf(grid[-1]))
        assert expected_min(r, emp) == pytest.approx(byhand, abs=5e-4)


# -- demand distribution plumbing ---------------------------------------------


def test_lognormal_pdf_integrates_to_one():
    d = LognormalDemand(0.7, 1.3)
    from scipy.integrate import quad
    total, _ = quad(d.pdf, 0.0, d.upper_tail(), limit=300)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_lognormal_quantile_inverts_cdf(rng):
    d = LognormalDemand(-0.3, 0.9)
    u = rng.uniform(0.01, 0.99, size=50)
    assert np.allclose(d.cdf(d.quantile(u)), u, atol=1e-12)


def test_pdf_bound_dominates_grid(rng):
    d = LognormalDemand(0.2, 0.7)
    for _ in range(30):
        lo = float(rng.uniform(0.0, 4.0))
        hi = lo + float(rng.uniform(0.01, 4.0))
        bound = d.pdf_bound(lo, hi)
        ys = np.linspace(lo, hi, 500)
        assert np.all(d.pdf(ys) <= bound + 1e-12)


def test_point_mass_has_no_density():
    with pytest.raises(DomainError):
        PointMassDemand(1.0).pdf(1.0)


def test_empirical_cdf_monotone(rng):
    obs = rng.lognormal(0.0, 0.5, size=200)
    grid = np.linspace(0.0, float(obs.max()) * 1.2, 512)
    hist = np.interp(grid, np.sort(obs), np.linspace(0, 1, obs.size))
    density = np.gradient(hist, grid)
    emp = EmpiricalDemand(grid, density)
    ys = np.linspace(0.0, grid[-1], 300)
    assert np.all(np.diff(emp.cdf(ys)) >= -1e-12)


# -- rayleigh channel ----------------------------------------------------------


def test_scaled_exp1_matches_scipy_and_is_continuous():
    a = np.array([0.1, 1.0, 10.0, 49.9])
    assert np.allclose(scaled_exp1(a), np.exp(a) * special.exp1(a), rtol=1e-12)
    # seam between the scipy branch and the asymptotic series
    assert scaled_exp1(50.0 - 1e-9) == pytest.approx(scaled_exp1(50.0 + 1e-9),
                                                     rel=1e-12)
    with pytest.raises(DomainError):
        scaled_exp1(0.0)


def test_ray_outage_matches_cdf_quadrature(rng):
    for _ in range(25):
        snr = float(rng.uniform(0.5, 30.0))
        t = float(rng.uniform(0.2, 6.0))
        r = float(rng.uniform(0.1, 5.0))
        assert ray_outage(r, t, snr) == pytest.approx(
            ref.rayleigh_outage(r, t, snr), abs=2e-8)


def test_outage_integration_by_parts(rng):
    # int_0^r z(v) (r - v) dv computed with the density must equal int_0^r Z dv
    from scipy.integrate import quad
    ch = RayleighChannel(4.0)
    for _ in range(8):
        t = float(rng.uniform(0.5, 3.0))
        r = float(rng.uniform(0.3, 4.0))
        by_parts, _ = quad(lambda v: ch.pdf(v, t) * (r - v), 0.0, r,
                           limit=300, epsabs=1e-12, epsrel=1e-11)
        assert by_parts == pytest.approx(expected_outage(r, t, ch), abs=1e-8)


def test_expected_outage_derivative_in_r_is_cdf(rng):
    ch = RayleighChannel(6.0)
    for _ in range(15):
        t = float(rng.uniform(0.3, 4.0))
        r = float(rng.uniform(0.2, 5.0))
        h = 1e-5
        fd = (expected_outage(r + h, t, ch) - expected_outage(r - h, t, ch)) / (2 * h)
        assert fd == pytest.approx(channel_cdf(r, t, ch), abs=1e-5)


def test_outage_dt_matches_finite_difference(rng):
    for _ in range(30):
        snr = float(rng.uniform(0.5, 20.0))
        t = float(rng.uniform(0.3, 5.0))
        r = float(rng.uniform(0.1, 4.0))
        h = 1e-5 * t
        fd = (ray_outage(r, t + h, snr) - ray_outage(r, t - h, snr)) / (2 * h)
        val = ray_outage_dt(r, t, snr)
        assert val <= 0.0
        assert val == pytest.approx(fd, abs=1e-5)


def test_channel_cdf_rejects_zero_resource():
    ch = RayleighChannel(2.0)
    with pytest.raises(DomainError):
        channel_cdf(1.0, 0.0, ch)
    with pytest.raises(DomainError):
        channel_pdf(1.0, -1.0, ch)


def test_zero_resource_outage_limits():
    assert ray_cdf(0.5, 0.0, 3.0) == 1.0
    assert ray_cdf(0.0, 0.0, 3.0) == 0.0
    assert ray_outage(0.7, 0.0, 3.0) == pytest.approx(0.7)
    assert expected_outage(0.7, 0.0, RayleighChannel(3.0)) == pytest.approx(0.7)
    assert expected_outage(0.0, 1.0, RayleighChannel(3.0)) == 0.0


def test_channel_pdf_integrates_to_one():
    from scipy.integrate import quad
    ch = RayleighChannel(5.0)
    t = 1.7
    total, _ = quad(lambda v: ch.pdf(v, t), 0.0, ch.upper_rate(t), limit=300)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_quantile_inverts_channel_cdf(rng):
    ch = RayleighChannel(8.0)
    t = 2.0
    for u in rng.uniform(0.05, 0.95, size=20):
        assert channel_cdf(ch.quantile(float(u), t), t, ch) == pytest.approx(
            float(u), abs=1e-12)


def test_mean_rate_matches_tail_integral():
    from scipy.integrate import quad
    ch = RayleighChannel(4.0)
    t = 1.3
    tail, _ = quad(lambda v: 1.0 - ch.cdf(v, t), 0.0, ch.upper_rate(t), limit=300)
    assert ch.mean_rate(t) == pytest.approx(tail, abs=1e-7)


def test_shared_outage_uses_summed_rate():
    ch = RayleighChannel(3.0)
    assert shared_outage([0.4, 0.6], 1.0, ch) == pytest.approx(
        expected_outage(1.0, 1.0, ch), abs=1e-12)


# -- deterministic channel -----------------------------------------------------


def test_deterministic_rate_law():
    ch = DeterministicChannel(delta=2.5)
    assert ch.rate(2.0) == 5.0
    assert ch.outage(6.0, 2.0) == 1.0
    assert ch.outage(4.0, 2.0) == 0.0
    assert ch.outage_dt(6.0, 2.0) == -2.5
    assert ch.outage_dt(4.0, 2.0) == 0.0
    assert ch.cdf(5.1, 2.0) == 1.0
    assert ch.cdf(4.9, 2.0) == 0.0


def test_deterministic_curve_interpolates_and_extends():
    ch = DeterministicChannel(curve=([0.0, 1.0, 2.0], [0.0, 3.0, 4.0]))
    assert ch.rate(0.5) == 1.5
    assert ch.rate(1.5) == 3.5
    # extension keeps the last slope
    assert ch.rate(3.0) == pytest.approx(5.0)
    assert ch.rate_slope(1.2) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        DeterministicChannel(curve=([0.5, 1.0], [0.0, 1.0]))
    with pytest.raises(DomainError):
        DeterministicChannel(delta=1.0, curve=([0.0, 1.0], [0.0, 1.0]))
