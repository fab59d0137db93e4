"""Slow, independent reference implementations used as test oracles.

Everything here is deliberately naive: projected gradient with Dykstra
projections for capacitated routing, dense grid scans for the small
allocation toys, fixed-sample Simpson quadrature for the outage integral,
and textbook closed forms for the lognormal moments.  None of the solver
modules under test are imported here; the only shared vocabulary is the
problem data itself.
"""

import math

import numpy as np
from scipy.integrate import simpson
from scipy.special import ndtr
from scipy.stats import lognorm

EXP_CAP = 60.0  # 2^60 already drives the Rayleigh tail to 1 at any sane SNR


# ---------------------------------------------------------------------------
# lognormal moments
# ---------------------------------------------------------------------------


def lognormal_mean(eta, sigma):
    return math.exp(eta + 0.5 * sigma * sigma)


def lognormal_expected_min(r, eta, sigma):
    """E[min(d, r)] for d ~ LogNormal(eta, sigma^2), closed form.

    Split at r: the truncated mean below r plus r times the upper tail mass.
    """
    if r <= 0.0:
        return 0.0
    u = (math.log(r) - eta) / sigma
    below = lognormal_mean(eta, sigma) * ndtr(u - sigma)
    return below + r * ndtr(-u)


def lognormal_quantile(q, eta, sigma):
    return float(lognorm(s=sigma, scale=math.exp(eta)).ppf(q))


def lognormal_pdf(x, eta, sigma):
    return lognorm(s=sigma, scale=math.exp(eta)).pdf(x)


# ---------------------------------------------------------------------------
# Rayleigh downlink outage by brute-force quadrature
# ---------------------------------------------------------------------------


def rayleigh_rate_cdf(v, t, snr):
    """P(achievable rate < v) at resource t; v, t broadcastable arrays."""
    v = np.asarray(v, dtype=float)
    t = np.asarray(t, dtype=float)
    tt = np.where(t > 0.0, t, 1.0)
    w = np.minimum(v / tt, EXP_CAP)
    z = -np.expm1(-(np.exp2(w) - 1.0) / snr)
    z = np.where(t > 0.0, z, 1.0)
    return np.where(v > 0.0, z, 0.0)


def rayleigh_outage(r, t, snr, samples=2049):
    """E[(r - rate)^+] as a Simpson integral of the rate CDF over [0, r]."""
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast(r, t).shape
    rr = np.broadcast_to(r, shape)[..., None]
    tt = np.broadcast_to(t, shape)[..., None]
    u = np.linspace(0.0, 1.0, samples)
    z = rayleigh_rate_cdf(u * rr, tt, snr)
    out = simpson(z, x=u, axis=-1) * np.broadcast_to(r, shape)
    return out if shape else float(out)


# ---------------------------------------------------------------------------
# capacitated routing reference: projected gradient + Dykstra projection
# ---------------------------------------------------------------------------


def dykstra_project(y, link_paths, caps, sweeps=400, tol=1e-14):
    """Project y onto {x >= 0} intersected with the link capacity halfspaces.

    Dykstra's alternating projections with per-set correction memory; each
    link constraint sums the coordinates of the paths crossing it, so its
    halfspace projection is a uniform shift of those coordinates.
    """
    x = np.array(y, dtype=float)
    mem = [0.0 for _ in link_paths]
    mem0 = np.zeros_like(x)
    for _ in range(sweeps):
        moved = 0.0
        for i, ix in enumerate(link_paths):
            if ix.size == 0:
                continue
            z = x[ix] + mem[i]
            over = max((z.sum() - caps[i]) / ix.size, 0.0)
            xn = z - over
            mem[i] = over
            moved = max(moved, over)
            x[ix] = xn
        z = x + mem0
        xn = np.maximum(z, 0.0)
        mem0 = z - xn
        moved = max(moved, float(np.abs(x - xn).max(initial=0.0)))
        x = xn
        if moved <= tol:
            break
    return x


def projected_gradient_routing(anchor, slope0, curvature, link_paths, caps,
                               iters=20000, tol=1e-12):
    """Minimize sum_p s0_p (r_p - a_p) + c_p/2 (r_p - a_p)^2 over the polytope.

    Plain projected gradient with the 1/L step; accuracy comes from running
    the linear convergence out to a movement tolerance far below what the
    comparisons need.
    """
    anchor = np.asarray(anchor, dtype=float)
    slope0 = np.asarray(slope0, dtype=float)
    curvature = np.asarray(curvature, dtype=float)
    step = 1.0 / float(curvature.max())
    x = dykstra_project(np.zeros_like(anchor), link_paths, caps)
    for _ in range(iters):
        g = slope0 + curvature * (x - anchor)
        xn = dykstra_project(x - step * g, link_paths, caps)
        if float(np.linalg.norm(xn - x)) <= tol * (1.0 + float(np.linalg.norm(xn))):
            return xn
        x = xn
    return x


def quadratic_objective(r, anchor, slope0, curvature):
    d = np.asarray(r, dtype=float) - anchor
    return float(np.sum(slope0 * d + 0.5 * curvature * d * d))


def routing_kkt_residual(rates, mu, slope_fn, link_paths, caps):
    """Worst KKT violation for min-cost routing given a candidate dual vector.

    Checks primal feasibility, dual feasibility, both complementarity pairs,
    and stationarity of the priced marginal cost (must be >= 0 everywhere and
    0 where the rate is positive).
    """
    rates = np.asarray(rates, dtype=float)
    mu = np.asarray(mu, dtype=float)
    loads = np.array([rates[ix].sum() for ix in link_paths])
    primal = float(np.maximum(loads - caps, 0.0).max(initial=0.0))
    primal = max(primal, float(np.maximum(-rates, 0.0).max(initial=0.0)))
    dual = float(np.maximum(-mu, 0.0).max(initial=0.0))
    comp_link = float(np.abs(mu * (caps - loads)).max(initial=0.0))
    price = np.zeros_like(rates)
    for m, ix in zip(mu, link_paths):
        price[ix] += m
    g = np.asarray(slope_fn(rates), dtype=float) + price
    stationarity = float(np.maximum(-g, 0.0).max(initial=0.0))
    comp_path = float(np.abs(rates * g).max(initial=0.0))
    return max(primal, dual, comp_link, stationarity, comp_path)


# ---------------------------------------------------------------------------
# dense scans for the low-dimensional toys
# ---------------------------------------------------------------------------


def grid_scan(fn, lo, hi, n=20001):
    """Dense 1-D scan of a vectorized function; returns (argmin, min)."""
    xs = np.linspace(lo, hi, n)
    vals = np.asarray(fn(xs), dtype=float)
    i = int(np.argmin(vals))
    return float(xs[i]), float(vals[i])


def grid_best_allocation(cost_fns, budget, step):
    """Exhaustive minimizer of sum_i f_i(t_i) with sum t <= budget, t >= 0.

    Full regular grid over the box, infeasible corner masked out; keep the
    number of lanes small.  Each f_i must accept an array.
    """
    axis = np.arange(0.0, budget + step / 2.0, step)
    grids = np.meshgrid(*([axis] * len(cost_fns)), indexing="ij")
    total = np.zeros_like(grids[0])
    val = np.zeros_like(grids[0])
    for g, fn in zip(grids, cost_fns):
        total = total + g
        val = val + np.asarray(fn(g), dtype=float)
    val = np.where(total <= budget + 1e-12, val, np.inf)
    flat = int(np.argmin(val))
    idx = np.unravel_index(flat, val.shape)
    t = np.array([float(axis[i]) for i in idx])
    return t, float(val[idx])
