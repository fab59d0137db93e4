import numpy as np
import pytest

from netreserve.bisection import bisect_root, grow_upper
from netreserve.errors import ConvergenceError


def test_root_of_increasing_function():
    lo, hi = bisect_root(lambda x: x * x - 2.0, np.zeros(1), np.full(1, 2.0))
    assert abs(0.5 * (lo[0] + hi[0]) - np.sqrt(2.0)) < 1e-12


def test_vector_lanes_are_independent():
    target = np.array([0.5, 1.0, 3.0, 7.5])
    lo, hi = bisect_root(lambda x: x - target, np.zeros(4), np.full(4, 8.0))
    assert np.allclose(0.5 * (lo + hi), target, atol=1e-12)


def test_no_root_collapses_on_endpoint():
    # fn positive on the whole bracket: collapse to lo (projected solution)
    lo, hi = bisect_root(lambda x: x + 1.0, np.zeros(1), np.ones(1))
    assert hi[0] < 1e-12
    # fn negative everywhere: collapse to hi
    lo, hi = bisect_root(lambda x: x - 5.0, np.zeros(1), np.ones(1))
    assert lo[0] > 1.0 - 1e-12


def test_bracket_invariant_preserved():
    rng = np.random.default_rng(7)
    for _ in range(20):
        roots = rng.uniform(0.1, 9.9, size=6)
        lo, hi = bisect_root(lambda x: x - roots, np.zeros(6), np.full(6, 10.0))
        assert np.all(lo <= hi)
        assert np.all(lo - roots <= 1e-9)
        assert np.all(hi - roots >= -1e-9)


def test_grow_upper_doubles_until_sign_change():
    hi = grow_upper(lambda h: h - 100.0, np.ones(3), "test bracket")
    assert np.all(hi >= 100.0)


def test_grow_upper_leaves_satisfied_lanes_alone():
    hi = grow_upper(lambda h: h - np.array([0.5, 100.0]), np.ones(2), "test")
    assert hi[0] == 1.0
    assert hi[1] >= 100.0


def test_grow_upper_raises_when_unbounded():
    with pytest.raises(ConvergenceError):
        grow_upper(lambda h: np.full_like(h, -1.0), np.ones(1), "unbounded")
