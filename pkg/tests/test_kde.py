import math

import numpy as np
import pytest

from netreserve.errors import DomainError
from netreserve.kde import bandwidth, kde_eval, kde_init, kde_update
from netreserve.stochastic import LognormalDemand


def test_single_observation_peak():
    # first observation: h_1 = 1, so the peak is the standard normal at 0
    state = kde_init(-5.0, 5.0, n_points=1001)
    kde_update(state, 0.0)
    assert kde_eval(state, 0.0) == pytest.approx(0.3989422804014327, abs=1e-12)


def test_bandwidth_law():
    for k in (1, 2, 7, 100):
        for beta in (0.5, 1.0, 3.0):
            assert bandwidth(k, beta) == pytest.approx(
                float(k) ** (-1.0 / (2.0 * beta + 1.0)), rel=1e-15)
    # shrinks with k
    assert bandwidth(10, 1.0) < bandwidth(2, 1.0) < bandwidth(1, 1.0)


def test_recursive_equals_batch(rng):
    obs = rng.normal(1.0, 0.7, size=50)
    state = kde_init(-3.0, 5.0, n_points=512, beta=1.0)
    for x in obs:
        kde_update(state, x)

    batch = np.zeros_like(state.grid)
    for k, x in enumerate(obs, start=1):
        h = bandwidth(k, 1.0)
        u = (x - state.grid) / h
        batch += np.exp(-0.5 * u * u) / (math.sqrt(2 * math.pi) * h)
    batch /= obs.size

    assert np.max(np.abs(state.density - batch)) < 1e-12
    assert state.count == 50


def test_l1_error_against_true_lognormal(rng):
    true = LognormalDemand(0.0, 0.5)
    state = kde_init(0.0, 8.0, n_points=512, beta=1.0)
    for x in rng.lognormal(0.0, 0.5, size=10_000):
        kde_update(state, x)
    l1 = np.trapezoid(np.abs(state.density - true.pdf(state.grid)), state.grid)
    assert l1 < 0.1


def test_density_mass_near_one(rng):
    state = kde_init(-8.0, 8.0, n_points=512)
    for x in rng.normal(0.0, 1.0, size=300):
        kde_update(state, x)
    mass = np.trapezoid(state.density, state.grid)
    assert mass == pytest.approx(1.0, abs=1e-3)


def test_eval_before_update_is_an_error():
    state = kde_init(0.0, 1.0)
    with pytest.raises(DomainError):
        kde_eval(state, 0.5)


def test_init_and_update_guards():
    with pytest.raises(DomainError):
        kde_init(1.0, 1.0)
    with pytest.raises(DomainError):
        kde_init(0.0, 1.0, beta=0.0)
    with pytest.raises(DomainError):
        kde_init(0.0, 1.0, n_points=1)
    state = kde_init(0.0, 1.0)
    with pytest.raises(DomainError):
        kde_update(state, float("nan"))
