"""Recursive kernel density estimation with per-observation shrinking bandwidths.

The estimate after n observations X_1..X_n is

    chi_n(x) = (1/n) sum_k (1/h_k) K((X_k - x) / h_k),  h_k = k^(-gamma),

with Gaussian kernel K and gamma = 1 / (2 beta + 1), maintained recursively:

    chi_{n+1}(x) = n/(n+1) chi_n(x) + K((X_{n+1} - x) / h_{n+1}) / ((n+1) h_{n+1}).

The estimate lives on a fixed grid; evaluation interpolates linearly.
"""

from dataclasses import dataclass

import math
import numpy as np

from .errors import DomainError

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass
class KdeState:
    grid: np.ndarray
    density: np.ndarray
    count: int
    beta: float

    @property
    def gamma(self):
        return 1.0 / (2.0 * self.beta + 1.0)


def kde_init(lo, hi, n_points=512, beta=1.0):
    """Fresh estimator on a uniform grid over [lo, hi]."""
    if not hi > lo:
        raise DomainError("grid upper bound must exceed lower bound")
    if not beta > 0.0:
        raise DomainError("beta must be positive")
    if n_points < 2:
        raise DomainError("grid needs at least 2 points")
    grid = np.linspace(float(lo), float(hi), int(n_points))
    return KdeState(grid=grid, density=np.zeros(int(n_points)), count=0, beta=float(beta))


def bandwidth(k, beta):
    """h_k = k^(-gamma) with gamma = 1/(2 beta + 1)."""
    return float(k) ** (-1.0 / (2.0 * beta + 1.0))


def kde_update(state, observation):
    """Fold one observation into the estimate; O(grid size)."""
    x = float(observation)
    if not math.isfinite(x):
        raise DomainError("observation must be finite")
    n = state.count + 1
    h = bandwidth(n, state.beta)
    u = (x - state.grid) / h
    kern = np.exp(-0.5 * u * u) / (_SQRT_2PI * h)
    state.density = state.density * ((n - 1) / n) + kern / n
    state.count = n
    return state


def kde_eval(state, x):
    """Density estimate at x (linear interpolation between grid points)."""
    if state.count == 0:
        raise DomainError("estimator has no observations yet")
    val = np.interp(np.asarray(x, dtype=float), state.grid, state.density)
    return val if val.ndim else float(val)
