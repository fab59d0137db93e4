"""Per-path cost families consumed by the routing engine.

A separable cost assigns each flow (path) index an increasing marginal-cost
function.  The routing engine only ever calls `slope` on vectors of flow
indices, so families store their parameters as arrays aligned with the flow
indexing of the problem they were built for.  `gather(idx)` returns a closure
with the parameters pre-indexed; the bisection loops call it thousands of
times per solve, so the fancy indexing has to happen once, not per call.

`value` is used for dual-bound diagnostics and tests, never inside the
bisection loops.
"""

import numpy as np

from .errors import DomainError
from .stochastic import _EXP2_CAP, ray_cdf, ray_outage


def gather_slope(costs, idx):
    """Pre-indexed slope evaluator, falling back to plain slope calls."""
    if hasattr(costs, "gather"):
        return costs.gather(idx)
    idx = np.asarray(idx, dtype=np.intp)
    return lambda r: costs.slope(idx, r)


class QuadraticCosts:
    """psi_p(r) = slope0_p (r - anchor_p) + curvature_p / 2 (r - anchor_p)^2."""

    strict = True

    def __init__(self, anchor, slope0, curvature):
        self.anchor = np.asarray(anchor, dtype=float)
        self.slope0 = np.asarray(slope0, dtype=float)
        self.curvature = np.asarray(curvature, dtype=float)
        if np.any(self.curvature <= 0.0):
            raise DomainError("quadratic costs need positive curvature")
        self.n = self.anchor.size

    @classmethod
    def pull_toward(cls, target, weight=1.0):
        """psi_p(r) = weight/2 (r - target_p)^2."""
        target = np.asarray(target, dtype=float)
        w = np.broadcast_to(np.asarray(weight, dtype=float), target.shape)
        return cls(target, np.zeros_like(target), w)

    def slope(self, idx, r):
        return self.slope0[idx] + self.curvature[idx] * (r - self.anchor[idx])

    def gather(self, idx):
        s0, c, a = self.slope0[idx], self.curvature[idx], self.anchor[idx]
        return lambda r: s0 + c * (r - a)

    def value(self, idx, r):
        d = r - self.anchor[idx]
        return self.slope0[idx] * d + 0.5 * self.curvature[idx] * d * d


class LinearCosts:
    """psi_p(r) = c_p r: convex but not strict; route through the proximal solver."""

    strict = False

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)
        self.n = self.c.size

    def slope(self, idx, r):
        return np.broadcast_to(self.c[idx], np.shape(r)).astype(float, copy=True)

    def gather(self, idx):
        c = self.c[idx]
        return lambda r: c + 0.0 * r

    def value(self, idx, r):
        return self.c[idx] * r


class ProximalCosts:
    """inner cost plus kappa/2 (r - anchor)^2, which restores strictness."""

    strict = True

    def __init__(self, inner, kappa, anchor):
        if not kappa > 0.0:
            raise DomainError("proximal weight must be positive")
        self.inner = inner
        self.kappa = float(kappa)
        self.anchor = np.asarray(anchor, dtype=float)
        self.n = inner.n

    def slope(self, idx, r):
        return self.inner.slope(idx, r) + self.kappa * (r - self.anchor[idx])

    def gather(self, idx):
        inner = gather_slope(self.inner, idx)
        a, kap = self.anchor[idx], self.kappa
        return lambda r: inner(r) + kap * (r - a)

    def value(self, idx, r):
        d = r - self.anchor[idx]
        return self.inner.value(idx, r) + 0.5 * self.kappa * d * d


class SurrogateCosts:
    """Separable upper bound used by the rate step of the joint solver.

    Marginal cost of flow p:

        slope_p(r) = base_p + lip_p (r - anchor_p) + theta_p Z(r, t_p; snr_p)

    where base folds every constant term (the demand-shortfall derivative
    F_k - 1 and, for paths that share a downlink, the outage CDF frozen at the
    anchor sum), lip is the quadratic damping weight, and the Z term is the
    exact outage CDF for paths that own their downlink.  Entries with
    theta = 0 are pure quadratics (deterministic channels, shared downlinks).
    """

    strict = True

    def __init__(self, base, lip, anchor, theta=None, snr=None, tres=None):
        self.base = np.asarray(base, dtype=float)
        self.lip = np.asarray(lip, dtype=float)
        self.anchor = np.asarray(anchor, dtype=float)
        self.n = self.base.size
        if theta is None:
            self.theta = np.zeros(self.n)
            self.snr = np.ones(self.n)
            self.tres = np.zeros(self.n)
        else:
            self.theta = np.asarray(theta, dtype=float)
            self.snr = np.asarray(snr, dtype=float)
            self.tres = np.asarray(tres, dtype=float)
        if np.any(self.lip <= 0.0):
            raise DomainError("surrogate damping weights must be positive")

    def slope(self, idx, r):
        out = self.base[idx] + self.lip[idx] * (r - self.anchor[idx])
        th = self.theta[idx]
        live = th > 0.0
        if np.any(live):
            out = np.array(out, copy=True)
            out[live] += th[live] * ray_cdf(
                np.asarray(r, dtype=float)[live], self.tres[idx][live],
                self.snr[idx][live]
            )
        return out

    def gather(self, idx):
        base, lip, anchor = self.base[idx], self.lip[idx], self.anchor[idx]
        th = self.theta[idx]
        live = th > 0.0
        if not np.any(live):
            return lambda r: base + lip * (r - anchor)
        # same arithmetic as ray_cdf, with dead lanes contributing exactly 0
        t, snr = self.tres[idx], self.snr[idx]
        pos_t = t > 0.0
        tt = np.where(pos_t, t, 1.0)
        thz = np.where(live, th, 0.0)

        def slope(r):
            e = np.minimum(r / tt, _EXP2_CAP)
            z = -np.expm1((1.0 - np.exp2(e)) / snr)
            z = np.where(pos_t, z, 1.0)
            z = np.where(r > 0.0, z, 0.0)
            return base + lip * (r - anchor) + thz * z

        return slope

    def value(self, idx, r):
        d = r - self.anchor[idx]
        out = self.base[idx] * d + 0.5 * self.lip[idx] * d * d
        th = self.theta[idx]
        live = th > 0.0
        if np.any(live):
            out = np.array(out, copy=True)
            ra = np.asarray(r, dtype=float)[live]
            t = self.tres[idx][live]
            s = self.snr[idx][live]
            a = self.anchor[idx][live]
            out[live] += th[live] * (ray_outage(ra, t, s) - ray_outage(a, t, s))
        return out


class QuadraticJointCost:
    """Non-separable test cost 1/2 ||A r - b||^2 with exact gradient Lipschitz bound."""

    def __init__(self, a_matrix, b):
        self.a = np.asarray(a_matrix, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.gamma = float(np.linalg.norm(self.a.T @ self.a, 2))

    def value(self, r):
        d = self.a @ r - self.b
        return 0.5 * float(d @ d)

    def grad(self, r):
        return self.a.T @ (self.a @ r - self.b)


class SeparableJointCost:
    """Adapter presenting a separable cost through the joint interface."""

    def __init__(self, costs, gamma):
        self.costs = costs
        self.gamma = float(gamma)

    def value(self, r):
        idx = np.arange(self.costs.n)
        return float(np.sum(self.costs.value(idx, np.asarray(r, dtype=float))))

    def grad(self, r):
        idx = np.arange(self.costs.n)
        return self.costs.slope(idx, np.asarray(r, dtype=float))
