import numpy as np
import pytest

from netreserve.costs import (
    LinearCosts,
    ProximalCosts,
    QuadraticCosts,
    QuadraticJointCost,
    SeparableJointCost,
    SurrogateCosts,
    gather_slope,
)
from netreserve.errors import DomainError
from netreserve.stochastic import (
    LognormalDemand,
    RayleighChannel,
    expected_min,
    expected_outage,
    ray_cdf,
)


def test_quadratic_slope_and_value():
    q = QuadraticCosts(anchor=[1.0, 2.0], slope0=[0.5, -1.0], curvature=[2.0, 3.0])
    idx = np.array([0, 1])
    r = np.array([2.0, 2.0])
    assert np.allclose(q.slope(idx, r), [0.5 + 2.0, -1.0])
    assert np.allclose(q.value(idx, r), [0.5 + 1.0, 0.0])


def test_pull_toward_minimum_at_target():
    q = QuadraticCosts.pull_toward([3.0, 4.0], weight=2.0)
    idx = np.array([0, 1])
    assert np.allclose(q.slope(idx, np.array([3.0, 4.0])), 0.0)
    assert q.strict


def test_quadratic_rejects_flat_curvature():
    with pytest.raises(DomainError):
        QuadraticCosts([0.0], [0.0], [0.0])


def test_gather_matches_slope(rng):
    q = QuadraticCosts(rng.normal(size=6), rng.normal(size=6),
                       rng.uniform(0.5, 2.0, size=6))
    idx = np.array([4, 1, 1, 5])
    fn = gather_slope(q, idx)
    for _ in range(5):
        r = rng.uniform(-2.0, 2.0, size=4)
        assert np.array_equal(fn(r), q.slope(idx, r))


def test_linear_is_not_strict():
    lin = LinearCosts([1.0, 2.0])
    assert not lin.strict
    idx = np.array([0, 1])
    assert np.allclose(lin.slope(idx, np.array([5.0, 5.0])), [1.0, 2.0])
    assert np.allclose(lin.value(idx, np.array([2.0, 2.0])), [2.0, 4.0])


def test_proximal_restores_strictness():
    lin = LinearCosts([1.0])
    prox = ProximalCosts(lin, 0.5, [2.0])
    assert prox.strict
    idx = np.array([0])
    # slope = 1 + 0.5 (r - 2)
    assert prox.slope(idx, np.array([4.0]))[0] == pytest.approx(2.0)
    fn = gather_slope(prox, idx)
    assert fn(np.array([4.0]))[0] == pytest.approx(2.0)
    with pytest.raises(DomainError):
        ProximalCosts(lin, 0.0, [0.0])


def _surrogate_toy(rng, n=5):
    base = rng.normal(scale=0.4, size=n)
    lip = rng.uniform(0.5, 2.0, size=n)
    anchor = rng.uniform(0.0, 2.0, size=n)
    theta = np.where(rng.uniform(size=n) < 0.6, rng.uniform(0.2, 1.0, size=n), 0.0)
    snr = rng.uniform(1.0, 10.0, size=n)
    tres = rng.uniform(0.5, 3.0, size=n)
    return SurrogateCosts(base, lip, anchor, theta=theta, snr=snr, tres=tres)


def test_surrogate_gather_matches_slope(rng):
    sc = _surrogate_toy(rng)
    idx = np.arange(sc.n)
    fn = sc.gather(idx)
    for _ in range(10):
        r = rng.uniform(0.0, 4.0, size=sc.n)
        assert np.allclose(fn(r), sc.slope(idx, r), atol=1e-15)


def test_surrogate_slope_is_base_plus_z():
    sc = SurrogateCosts([0.3], [1.0], [1.0], theta=[0.5], snr=[4.0], tres=[2.0])
    idx = np.array([0])
    r = np.array([1.5])
    expect = 0.3 + 1.0 * 0.5 + 0.5 * ray_cdf(1.5, 2.0, 4.0)
    assert sc.slope(idx, r)[0] == pytest.approx(float(expect), abs=1e-15)


def test_surrogate_value_gradient_consistent(rng):
    # value must integrate the slope: check by finite differences
    sc = _surrogate_toy(rng)
    idx = np.arange(sc.n)
    r = rng.uniform(0.2, 3.0, size=sc.n)
    h = 1e-6
    fd = (sc.value(idx, r + h) - sc.value(idx, r - h)) / (2 * h)
    assert np.allclose(fd, sc.slope(idx, r), atol=1e-6)


def test_surrogate_value_zero_at_anchor(rng):
    sc = _surrogate_toy(rng)
    idx = np.arange(sc.n)
    assert np.allclose(sc.value(idx, sc.anchor.copy()), 0.0, atol=1e-15)


def test_surrogate_majorizes_true_objective(rng):
    # psi(r) - psi(anchor) must upper-bound the true per-user objective change
    # when the damping weight covers the demand density over the step
    demand = LognormalDemand(0.3, 0.8)
    ch = RayleighChannel(5.0)
    theta, tres = 0.7, 1.5
    anchor = 1.2
    base = demand.cdf(anchor) - 1.0
    lip = demand.pdf_max()
    sc = SurrogateCosts([base], [lip], [anchor], theta=[theta], snr=[5.0],
                        tres=[tres])
    idx = np.array([0])

    def true_change(r):
        gain = expected_min(r, demand) - expected_min(anchor, demand)
        pen = theta * (expected_outage(r, tres, ch) - expected_outage(anchor, tres, ch))
        return -gain + pen

    for r in rng.uniform(0.0, 4.0, size=100):
        model = float(sc.value(idx, np.array([r]))[0])
        assert model >= true_change(float(r)) - 1e-9


def test_surrogate_rejects_flat_damping():
    with pytest.raises(DomainError):
        SurrogateCosts([0.0], [0.0], [0.0])


def test_quadratic_joint_cost_gamma_is_spectral_norm(rng):
    a = rng.normal(size=(4, 3))
    joint = QuadraticJointCost(a, rng.normal(size=4))
    assert joint.gamma == pytest.approx(np.linalg.norm(a.T @ a, 2), rel=1e-12)
    r = rng.normal(size=3)
    h = 1e-6
    g = joint.grad(r)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (joint.value(r + e) - joint.value(r - e)) / (2 * h)
        assert g[i] == pytest.approx(fd, abs=1e-5)


def test_separable_joint_adapter(rng):
    q = QuadraticCosts(rng.normal(size=3), rng.normal(size=3),
                       rng.uniform(0.5, 2.0, size=3))
    joint = SeparableJointCost(q, gamma=2.0)
    r = rng.normal(size=3)
    idx = np.arange(3)
    assert joint.value(r) == pytest.approx(float(np.sum(q.value(idx, r))))
    assert np.allclose(joint.grad(r), q.slope(idx, r))
