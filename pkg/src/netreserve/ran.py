"""Block-coordinate transmission-resource allocation under AP budgets.

Given fixed path rates, the resource step minimises the expected-outage cost

    sum_w theta_w O(r_w, t_w)   s.t.  sum_{w in b} t_w <= C_b,  t >= 0

one successive convex upper bound at a time: O is replaced around the current
point by a model whose t-derivative is the exact derivative plus a damping
term zeta (t - anchor).  zeta tracks the derivative's slope at the anchor and
is raised to the interval-wide Lipschitz estimate whenever a round falls
outside what the local value bounds, so every accepted round is a genuine
upper-bound step.  Each model splits across APs; inside an AP the budget
price lambda is found by bisection over the per-downlink stationary points.

The same pair-lane conventions as the routing engine apply: fixed iteration
counts, lanes that never communicate except through per-AP sums, contiguous
AP spans for workers, hence bit-identical output for any worker count.
"""

from dataclasses import dataclass, field

import numpy as np

from .bisection import bisect_root, grow_upper
from .errors import ConvergenceError, DomainError
from .parallel import run_spans
from .stochastic import _quad, ray_outage, ray_outage_dt

T_MIN = 1e-9


@dataclass(frozen=True)
class RanConfig:
    """Knobs for the resource iteration."""

    t_tol: float = 1e-6          # movement tolerance, scaled by 1 + ||t||
    max_iter: int = 200
    bisect_iters: int = 48
    t_min: float = T_MIN         # smallest positive resource the solves produce
    zeta_min: float = 1e-3
    zeta_samples: int = 8
    workers: int = 1


@dataclass
class RanDualState:
    """Budget prices and per-downlink duals at the final iteration."""

    lam: dict                    # AP node id -> budget price
    beta: dict                   # downlink id -> resource dual (zero where t > 0)
    zeta: dict                   # downlink id -> damping weight used
    iterations: int
    residual: float
    converged: bool
    trace: list = field(default_factory=list)   # (iteration, movement, outage cost)


def outage_t_derivative(r, t, channel):
    """d/dt of the expected saturated shortfall, by quadrature of dZ/dt.

    Deterministic channels delegate to their analytic derivative.  Raises
    DomainError for t <= 0; the solver handles the t -> 0 limit itself.
    """
    if t <= 0.0:
        raise DomainError("derivative needs t > 0")
    if r < 0.0:
        raise DomainError("rate must be nonnegative")
    if r == 0.0:
        return 0.0
    if getattr(channel, "kind", "") == "deterministic":
        return channel.outage_dt(r, t)
    snr = channel.mean_snr

    def dz_dt(v):
        x = np.exp2(min(v / t, 1000.0))
        return -np.exp((1.0 - x) / snr) * x * np.log(2.0) * v / (snr * t * t)

    return _quad(dz_dt, 0.0, r)


def project_budgets(topology, t):
    """Clip negatives and scale each AP's allocations down onto its budget."""
    t = np.maximum(np.asarray(t, dtype=float), 0.0)
    loads = topology.ap_loads(t)
    scale = np.ones(len(topology.aps))
    over = loads > topology.budgets
    scale[over] = topology.budgets[over] / loads[over]
    return t * scale[topology.downlink_ap]


class _ApProblem:
    """AP-major lane layout for the per-AP solves.

    Rate lanes (one per contributing path, or one per downlink in shared
    mode) are sorted by AP then downlink; downlinks are sorted by AP.  All
    arrays below live in that order, and `w_order` maps sorted downlink
    positions back to downlink indices.
    """

    def __init__(self, n_aps, budgets, dl_ap, rr, lane_dl, theta_dl, snr_dl, smooth_dl):
        self.n_aps = n_aps
        self.budgets = np.asarray(budgets, dtype=float)
        dl_ap = np.asarray(dl_ap, dtype=np.intp)
        self.n_dl = dl_ap.size
        self.w_order = np.argsort(dl_ap, kind="stable")
        w_rank = np.empty(self.n_dl, dtype=np.intp)
        w_rank[self.w_order] = np.arange(self.n_dl)
        self.ap_start = np.searchsorted(dl_ap[self.w_order], np.arange(n_aps + 1))
        lane_rank = w_rank[np.asarray(lane_dl, dtype=np.intp)]
        lane_order = np.argsort(lane_rank, kind="stable")
        self.lane_w = lane_rank[lane_order]
        self.lane_start = np.searchsorted(self.lane_w, np.arange(self.n_dl + 1))
        self.rr = np.asarray(rr, dtype=float)[lane_order]
        self.theta = np.asarray(theta_dl, dtype=float)[self.w_order]
        self.snr = np.asarray(snr_dl, dtype=float)[self.w_order]
        self.smooth = np.asarray(smooth_dl, dtype=bool)[self.w_order]
        self.dl_ap_sorted = dl_ap[self.w_order]

    def deriv(self, i0, i1, t_dl):
        """Summed outage derivative per downlink in [i0, i1), at resources t_dl."""
        l0, l1 = self.lane_start[i0], self.lane_start[i1]
        lw = self.lane_w[l0:l1] - i0
        d = ray_outage_dt(self.rr[l0:l1], t_dl[lw], self.snr[i0:i1][lw])
        return np.bincount(lw, weights=d, minlength=i1 - i0)


def _zeta_estimate(prob, config):
    """Damping weights: empirical Lipschitz constant of each downlink's summed
    outage derivative over [t_min, budget], floored at zeta_min."""
    hi = np.maximum(prob.budgets[prob.dl_ap_sorted], 2.0 * config.t_min)
    samples = np.geomspace(1e-9, 1.0, config.zeta_samples)
    zeta = np.full(prob.n_dl, config.zeta_min)
    prev = None
    prev_t = None
    for s in samples:
        t_dl = np.maximum(s * hi, config.t_min)
        cur = prob.deriv(0, prob.n_dl, t_dl)
        if prev is not None:
            dt = np.maximum(t_dl - prev_t, 1e-300)
            zeta = np.maximum(zeta, np.abs(cur - prev) / dt)
        prev, prev_t = cur, t_dl
    return np.where(prob.smooth, zeta, config.zeta_min)


def _zeta_local(prob, t_sorted, config):
    """Damping weights from the derivative's slope right at the anchors.

    The proximal model keeps the outage term exact, so damping is only needed
    against negative curvature (the near side of the outage knee), and only
    as much of it as the anchor sees; past the knee the term is convex and
    the floor alone leaves the per-AP solves essentially exact.  Rounds where
    a root-find was fooled anyway are caught by the descent test in ran_bsum
    and redone with the interval-wide constant.
    """
    h = np.maximum(1e-3 * t_sorted, 1e-4)
    lo = np.maximum(t_sorted - h, config.t_min)
    hi = np.maximum(t_sorted + h, config.t_min + h)
    d_lo = prob.deriv(0, prob.n_dl, lo)
    d_hi = prob.deriv(0, prob.n_dl, hi)
    curv = (d_hi - d_lo) / np.maximum(hi - lo, 1e-300)
    return np.where(prob.smooth, np.maximum(-curv, config.zeta_min), config.zeta_min)


def _outage_by_dl(prob, t_sorted):
    """True per-downlink outage cost at AP-major resources (unweighted)."""
    lw = prob.lane_w
    o = ray_outage(prob.rr, t_sorted[lw], prob.snr[lw])
    return np.bincount(lw, weights=o, minlength=prob.n_dl)


def _ap_span_solve(prob, anchors, zeta, config, a, b):
    """Budget-priced stationary resources for APs [a, b).

    anchors and zeta are AP-major per-downlink arrays.  Returns (t, lambda,
    beta) for the span, t in AP-major downlink order.
    """
    i0, i1 = prob.ap_start[a], prob.ap_start[b]
    n_dl = i1 - i0
    n_ap = b - a
    if n_dl == 0:
        return np.zeros(0), np.zeros(n_ap), np.zeros(0)
    anc = anchors[i0:i1]
    zet = zeta[i0:i1]
    th = prob.theta[i0:i1]
    sm = prob.smooth[i0:i1] & (th > 0.0)
    ap_of = prob.dl_ap_sorted[i0:i1] - a
    caps = prob.budgets[a:b]
    tmin = np.full(n_dl, config.t_min)

    def g(t_dl, lam_dl):
        val = th * (prob.deriv(i0, i1, t_dl) + zet * (t_dl - anc)) + lam_dl
        return np.where(sm, val, 1.0)

    zeros = np.zeros(n_dl)
    d_zero = prob.deriv(i0, i1, zeros)     # t -> 0 limit of the derivative
    # stationary resources shrink as the price grows, so the zero-price
    # bracket stays valid for every price
    hi = grow_upper(lambda t: g(t, zeros),
                    np.maximum(caps[ap_of], 2.0 * config.t_min),
                    "resource bracket")

    def resources(lam_ap):
        lam_dl = lam_ap[ap_of]
        g_min = g(tmin, lam_dl)
        lo_t, hi_t = bisect_root(lambda t: g(t, lam_dl), tmin, hi,
                                 config.bisect_iters)
        t = 0.5 * (lo_t + hi_t)
        # root under t_min: stick at zero when the zero-limit slope is already
        # nonnegative, else stay on the floor
        beta0 = th * (d_zero - zet * anc) + lam_dl
        t = np.where(g_min >= 0.0, np.where(beta0 >= 0.0, 0.0, config.t_min), t)
        return np.where(sm, t, np.where(lam_dl > 0.0, 0.0, anc))

    def excess(lam_ap):
        return np.bincount(ap_of, weights=resources(lam_ap), minlength=n_ap) - caps

    bind = excess(np.zeros(n_ap)) > 0.0

    def slack(lam_ap):
        return np.where(bind, -excess(lam_ap), 1.0)

    seed_dl = th * (np.abs(d_zero) + zet * np.maximum(anc, 0.0))
    seed = np.zeros(n_ap)
    np.maximum.at(seed, ap_of, seed_dl)
    lam_hi = grow_upper(slack, np.where(bind, np.maximum(seed, 1e-3), 0.0),
                        "budget price bracket")
    _, lam_hi = bisect_root(slack, np.zeros(n_ap), lam_hi, config.bisect_iters)
    lam = np.where(bind, lam_hi, 0.0)
    t = resources(lam)
    beta_smooth = np.maximum(th * (d_zero - zet * anc) + lam[ap_of], 0.0)
    beta = np.where(t == 0.0, np.where(sm, beta_smooth, lam[ap_of]), 0.0)
    return t, lam, beta


def solve_per_ap(budget, rates, anchors, zeta, theta, snr, config=None, smooth=None):
    """One AP's priced subproblem; returns (t, lambda, beta) per downlink."""
    config = config or RanConfig()
    rates = np.asarray(rates, dtype=float)
    n = rates.size
    smooth = np.ones(n, dtype=bool) if smooth is None else np.asarray(smooth)
    prob = _ApProblem(1, [budget], np.zeros(n, dtype=np.intp), rates,
                      np.arange(n), np.broadcast_to(theta, (n,)),
                      np.broadcast_to(snr, (n,)), smooth)
    t, lam, beta = _ap_span_solve(prob, np.asarray(anchors, dtype=float)[prob.w_order],
                                  np.asarray(zeta, dtype=float)[prob.w_order],
                                  config, 0, 1)
    out_t = np.empty(n)
    out_b = np.empty(n)
    out_t[prob.w_order] = t
    out_b[prob.w_order] = beta
    return out_t, float(lam[0]), out_b


def outage_cost(prob, t_sorted, theta=None):
    """True weighted outage cost at AP-major resources (descent diagnostics)."""
    th = prob.theta if theta is None else theta
    lw = prob.lane_w
    o = ray_outage(prob.rr, t_sorted[lw], prob.snr[lw])
    per_dl = np.bincount(lw, weights=o, minlength=prob.n_dl)
    return float(np.sum(th * per_dl * prob.smooth))


def ran_bsum(topology, rates, anchors, theta, config=None, channels=None,
             shared=False):
    """Resource reservations under AP budgets for fixed path rates.

    Returns (t, RanDualState) with t aligned to topology.downlinks.  theta is
    a per-user array; channels an optional per-downlink list whose
    deterministic entries contribute no outage and therefore keep their
    anchors (projected onto the budgets).  With shared=True the outage of a
    downlink is driven by the sum of its path rates instead of path by path.
    """
    config = config or RanConfig()
    rates = np.asarray(rates, dtype=float)
    anchors = project_budgets(topology, anchors)
    n_dl = len(topology.downlinks)
    det = np.zeros(n_dl, dtype=bool)
    if channels is not None:
        det = np.array([getattr(c, "kind", "") == "deterministic" for c in channels])
    theta_dl = np.asarray(theta, dtype=float)[topology.downlink_user]
    if np.all(det | (theta_dl <= 0.0)):
        state = RanDualState(
            lam={a.node: 0.0 for a in topology.aps},
            beta={int(topology.downlinks[i].id): 0.0 for i in range(n_dl)},
            zeta={int(topology.downlinks[i].id): config.zeta_min for i in range(n_dl)},
            iterations=0, residual=0.0, converged=True)
        return anchors, state

    if shared:
        rr = topology.downlink_rates(rates)
        lane_dl = np.arange(n_dl)
    else:
        rr = rates
        lane_dl = topology.path_downlink
    prob = _ApProblem(len(topology.aps), topology.budgets, topology.downlink_ap,
                      rr, lane_dl, theta_dl, topology.downlink_snr, ~det)
    zeta_cap = _zeta_estimate(prob, config)
    t = anchors[prob.w_order]
    trace = []
    converged = False
    iterations = 0
    move = float("inf")
    for j in range(1, config.max_iter + 1):
        zeta = _zeta_local(prob, t, config)
        o_anchor = _outage_by_dl(prob, t)
        for attempt in range(4):
            parts = run_spans(
                prob.n_aps, max(1, config.workers),
                lambda a, b: _ap_span_solve(prob, t, zeta, config, a, b))
            t_new = np.concatenate([p[0] for p in parts])
            lam = np.concatenate([p[1] for p in parts])
            beta = np.concatenate([p[2] for p in parts])
            # an exact per-AP minimization of outage + zeta/2 (t - anchor)^2
            # can only move downhill; an AP that gained outage hit a spurious
            # root of a non-monotone model derivative, so stiffen it to the
            # interval-wide constant (doubling from there) and redo
            step = t_new - t
            gain = prob.theta * (_outage_by_dl(prob, t_new) - o_anchor
                                 + 0.5 * zeta * step * step)
            ap_gain = np.bincount(prob.dl_ap_sorted,
                                  weights=gain * prob.smooth,
                                  minlength=prob.n_aps)
            bad_ap = ap_gain > 1e-9
            if attempt == 3 or not np.any(bad_ap):
                break
            bad = bad_ap[prob.dl_ap_sorted] & prob.smooth
            zeta = np.where(bad, np.maximum(2.0 * zeta, zeta_cap), zeta)
        move = float(np.linalg.norm(t_new - t))
        t = t_new
        iterations = j
        trace.append((j, move, outage_cost(prob, t)))
        if move < config.t_tol * (1.0 + float(np.linalg.norm(t))):
            converged = True
            break
    out = np.empty(n_dl)
    out[prob.w_order] = t
    beta_out = np.empty(n_dl)
    beta_out[prob.w_order] = beta
    zeta_out = np.empty(n_dl)
    zeta_out[prob.w_order] = zeta
    state = RanDualState(
        lam={topology.aps[a].node: float(lam[a]) for a in range(prob.n_aps)},
        beta={int(topology.downlinks[i].id): float(beta_out[i]) for i in range(n_dl)},
        zeta={int(topology.downlinks[i].id): float(zeta_out[i]) for i in range(n_dl)},
        iterations=iterations, residual=move, converged=converged, trace=trace)
    if not converged:
        raise ConvergenceError(
            f"resource iteration stalled after {iterations} rounds",
            residual=move, iterations=iterations, best=(out, state))
    return out, state
