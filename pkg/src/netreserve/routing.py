"""Parallel dual decomposition for multi-path rate reservation.

The capacity-coupled problem

    min sum_p psi_p(r_p)   s.t.  sum_{p in l} r_p <= C_l,  r >= 0

is split into one subproblem per link.  Each flow on a link carries a weight
alpha derived from the previous link prices, the per-link problems are solved
by a nested bisection (outer on the link price mu, inner on the rates), and
the prices are iterated to a fixed point.  At the fixed point every link
crossed by a path agrees on that path's rate, so the per-link rates can be
read off directly.

Everything is vectorised in a link-major "pair" layout: one lane per
(link, path) incidence.  Lanes never communicate except through per-link
segment sums, and all bisections run a fixed iteration count, so results are
bit-identical no matter how the links are split across workers.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .bisection import bisect_root, grow_upper
from .costs import QuadraticCosts, ProximalCosts, gather_slope
from .errors import ConvergenceError, DomainError, StructureError
from .network import Topology
from .parallel import default_workers, run_spans


@dataclass(frozen=True)
class RoutingConfig:
    """Knobs for the price iteration and its nested bisections."""

    mu_init: float = 1e-3         # starting price on every link
    mu_tol: float = 1e-6          # price movement tolerance, scaled by 1 + ||mu||
    max_outer: int = 5000         # price iterations before giving up
    bisect_iters: int = 48        # halvings for both nested bisections
    inner_tol: float = 1e-8       # stationarity residual the rate solves must meet
    surrogate_tol: float = 1e-4   # rate movement tolerance for the surrogate loops
    max_surrogate: int = 200      # surrogate iterations before giving up
    kappa: float = 1e-2           # proximal weight for non-strict costs
    workers: int = 1              # contiguous link spans solved concurrently
    trace: bool = False           # keep per-iteration (iteration, ||mu||, residual)


@dataclass
class RoutingDualState:
    """Prices and per-flow duals at the final iteration."""

    mu: dict                      # link id -> price
    phi: dict                     # path id -> rate dual (zero where r > 0)
    alpha: dict                   # (path id, link id) -> weight used in the last solve
    iterations: int
    residual: float
    converged: bool
    trace: list = field(default_factory=list)
    pair_rates: np.ndarray = None
    mu_vec: np.ndarray = None


class RoutingProblem:
    """Capacities plus the link lists of each path, in pair layout.

    Pairs are sorted link-major (link ascending, path ascending inside a
    link), which makes per-link slices contiguous and worker splits trivial.
    `upper` holds optional per-flow rate caps (deterministic downlink rate
    laws come in through here); they are enforced inside every per-link
    solve rather than priced, so they never enter the price iteration.
    """

    def __init__(self, capacities, path_links, link_ids=None, path_ids=None,
                 upper=None):
        self.capacities = np.asarray(capacities, dtype=float)
        self.n_links = self.capacities.size
        self.n_paths = len(path_links)
        if np.any(self.capacities < 0.0):
            raise DomainError("link capacities must be nonnegative")
        if upper is None:
            self.upper = np.full(self.n_paths, np.inf)
        else:
            self.upper = np.asarray(upper, dtype=float)
            if self.upper.size != self.n_paths or np.any(self.upper < 0.0):
                raise DomainError("per-flow caps must be nonnegative, one per path")
        links = []
        paths = []
        for p, lids in enumerate(path_links):
            for l in lids:
                if not 0 <= l < self.n_links:
                    raise DomainError(f"path {p} references unknown link {l}")
                links.append(l)
                paths.append(p)
        order = np.lexsort((paths, links))
        self.pair_link = np.asarray(links, dtype=np.intp)[order]
        self.pair_path = np.asarray(paths, dtype=np.intp)[order]
        self.n_pairs = self.pair_link.size
        self.link_start = np.searchsorted(self.pair_link, np.arange(self.n_links + 1))
        self.path_len = np.bincount(self.pair_path, minlength=self.n_paths)
        if np.any(self.path_len == 0):
            raise DomainError("every path needs at least one link")
        self.link_ids = (np.arange(self.n_links) if link_ids is None
                         else np.asarray(link_ids, dtype=np.intp))
        self.path_ids = (np.arange(self.n_paths) if path_ids is None
                         else np.asarray(path_ids, dtype=np.intp))

    @classmethod
    def from_topology(cls, topology, upper=None):
        return cls(topology.capacities,
                   list(topology.path_links),
                   link_ids=[l.id for l in topology.links],
                   path_ids=[p.id for p in topology.paths],
                   upper=upper)


def _as_problem(problem):
    return RoutingProblem.from_topology(problem) if isinstance(problem, Topology) else problem


def compute_alpha(mu_prev, path_links):
    """Weights of one path's links: price shares, uniform when all prices are zero."""
    mu_prev = np.asarray(mu_prev, dtype=float)
    lids = np.asarray(path_links, dtype=np.intp)
    if lids.size == 0:
        raise StructureError("cannot split a price over an empty path")
    w = mu_prev[lids]
    total = float(w.sum())
    if total <= 0.0:
        return np.full(lids.size, 1.0 / lids.size)
    return w / total


def _alpha_pairs(problem, mu):
    """compute_alpha for every pair lane at once."""
    w = mu[problem.pair_link]
    total = np.zeros(problem.n_paths)
    np.add.at(total, problem.pair_path, w)
    tp = total[problem.pair_path]
    uniform = 1.0 / problem.path_len[problem.pair_path]
    with np.errstate(invalid="ignore", divide="ignore"):
        shared = np.where(tp > 0.0, w / np.where(tp > 0.0, tp, 1.0), uniform)
    return shared


def _solve_span(problem, costs, alpha, iters, lo_link, hi_link):
    """Per-link solves for links[lo_link:hi_link).

    Returns (pair rates, link prices, pair phis) for the span.  The rate
    bracket is grown once at mu = 0; it stays valid for every positive price
    because larger prices only shrink the stationary rates.
    """
    s0 = problem.link_start[lo_link]
    s1 = problem.link_start[hi_link]
    pp = problem.pair_path[s0:s1]
    lp = problem.pair_link[s0:s1] - lo_link
    al = alpha[s0:s1]
    caps = problem.capacities[lo_link:hi_link]
    n_loc = hi_link - lo_link
    if pp.size == 0:
        return (np.zeros(0), np.zeros(n_loc), np.zeros(0))
    active = al > 0.0
    ub = problem.upper[pp]
    psi_slope = gather_slope(costs, pp)

    # bracket hi: any stationary rate satisfies psi'(r) <= 0 <= psi'(hi)
    seed = np.where(caps > 0.0, caps, 1.0)[lp]
    hi = grow_upper(lambda h: np.where(active, psi_slope(h), 1.0), seed,
                    "per-link rate bracket")
    zeros = np.zeros_like(hi)
    slope_at_zero = psi_slope(zeros)

    def rates(mu_link):
        mu_pair = mu_link[lp]

        def g(r):
            return np.where(active, al * psi_slope(r) + mu_pair, 1.0)

        g0 = np.where(active, al * slope_at_zero + mu_pair, 1.0)
        rlo, rhi = bisect_root(g, zeros, hi, iters)
        r = np.minimum(np.where(g0 >= 0.0, 0.0, 0.5 * (rlo + rhi)), ub)
        return np.where(active, r, 0.0)

    def excess(mu_link):
        return np.bincount(lp, weights=rates(mu_link), minlength=n_loc) - caps

    bind = excess(np.zeros(n_loc)) > 0.0

    def slack(mu_link):
        # nondecreasing in mu; positive once the link is back under capacity
        return np.where(bind, -excess(mu_link), 1.0)

    mu_hi = grow_upper(slack, np.where(bind, 1.0, 0.0), "link price bracket")
    _, mu_hi = bisect_root(slack, np.zeros(n_loc), mu_hi, iters)
    mu = np.where(bind, mu_hi, 0.0)
    r = rates(mu)
    safe = np.where(active, al, 1.0)
    phi = np.where(active & (r == 0.0),
                   np.maximum(slope_at_zero + mu[lp] / safe, 0.0), 0.0)
    return r, mu, phi


def _solve_all_links(problem, costs, alpha, config):
    workers = max(1, config.workers)
    parts = run_spans(
        problem.n_links, workers,
        lambda a, b: _solve_span(problem, costs, alpha, config.bisect_iters, a, b))
    r = np.concatenate([p[0] for p in parts])
    mu = np.concatenate([p[1] for p in parts])
    phi = np.concatenate([p[2] for p in parts])
    return r, mu, phi


def solve_per_link(capacity, alpha, costs, path_idx=None, config=None,
                   upper=None):
    """One link's subproblem: rates and the price mu for paths crossing it.

    alpha holds the positive weights of the participating flows;  path_idx
    maps them to flow indices of `costs` (defaults to 0..n-1).  Returns
    (rates, mu, phi) with the rates hitting the capacity exactly whenever the
    unconstrained rates overshoot it.
    """
    config = config or RoutingConfig()
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha < 0.0):
        raise DomainError("flow weights must be nonnegative")
    idx = np.arange(alpha.size) if path_idx is None else np.asarray(path_idx, dtype=np.intp)
    prob = RoutingProblem([capacity], [[0]] * alpha.size, upper=upper)
    # reuse the span engine with the real flow indices patched in
    prob.pair_path = idx
    r, mu, phi = _solve_span(prob, costs, alpha, config.bisect_iters, 0, 1)
    return r, float(mu[0]), phi


def _unconstrained_rates(problem, costs, iters):
    """Projected minimisers of each psi_p alone; used for fully unpriced paths."""
    idx = np.arange(problem.n_paths)
    zeros = np.zeros(problem.n_paths)
    fn = gather_slope(costs, idx)
    g0 = fn(zeros)
    hi = grow_upper(fn, np.ones(problem.n_paths), "unconstrained rate bracket")
    rlo, rhi = bisect_root(fn, zeros, hi, iters)
    r = np.minimum(np.where(g0 >= 0.0, 0.0, 0.5 * (rlo + rhi)), problem.upper)
    phi = np.maximum(g0, 0.0) * (r == 0.0)
    return r, phi


def _extract(problem, costs, pair_r, pair_phi, mu, alpha, iters):
    """Read rates off the last per-link solves.

    Each path takes its rate from the highest-indexed pair whose link carries
    a positive price and whose weight was positive; paths without such a pair
    fall back to the projected unconstrained minimiser.
    """
    sel = (alpha > 0.0) & (mu[problem.pair_link] > 0.0)
    best = np.full(problem.n_paths, -1, dtype=np.intp)
    if np.any(sel):
        np.maximum.at(best, problem.pair_path[sel], np.flatnonzero(sel))
    rates = np.zeros(problem.n_paths)
    phi = np.zeros(problem.n_paths)
    have = best >= 0
    rates[have] = pair_r[best[have]]
    phi[have] = pair_phi[best[have]]
    if np.any(~have):
        r_free, phi_free = _unconstrained_rates(problem, costs, iters)
        rates[~have] = r_free[~have]
        phi[~have] = phi_free[~have]
    return rates, phi


def route_separable(problem, costs, config=None, mu0=None):
    """Price-iterated multi-path rates for a separable strictly convex cost.

    Returns (rates, RoutingDualState).  Raises ConvergenceError with the best
    iterate attached if the price iteration hits its cap.
    """
    config = config or RoutingConfig()
    problem = _as_problem(problem)
    if not getattr(costs, "strict", False):
        raise DomainError("route_separable needs a strictly convex cost; "
                          "wrap it in ProximalCosts or use route_proximal")
    mu = (np.full(problem.n_links, config.mu_init) if mu0 is None
          else np.array(mu0, dtype=float, copy=True))
    trace = []
    pair_r = pair_phi = None
    alpha = None
    converged = False
    iterations = 0
    residual = float("inf")
    for j in range(1, config.max_outer + 1):
        alpha = _alpha_pairs(problem, mu)
        pair_r, mu_new, pair_phi = _solve_all_links(problem, costs, alpha, config)
        residual = float(np.linalg.norm(mu_new - mu))
        mu = mu_new
        iterations = j
        if config.trace:
            trace.append((j, float(np.linalg.norm(mu)), residual))
        if residual < config.mu_tol * (1.0 + float(np.linalg.norm(mu))):
            converged = True
            break
    rates, phi = _extract(problem, costs, pair_r, pair_phi, mu, alpha,
                          config.bisect_iters)
    state = RoutingDualState(
        mu={int(problem.link_ids[l]): float(mu[l]) for l in range(problem.n_links)},
        phi={int(problem.path_ids[p]): float(phi[p]) for p in range(problem.n_paths)},
        alpha={(int(problem.path_ids[problem.pair_path[i]]),
                int(problem.link_ids[problem.pair_link[i]])): float(alpha[i])
               for i in range(problem.n_pairs)},
        iterations=iterations, residual=residual, converged=converged,
        trace=trace, pair_rates=pair_r, mu_vec=mu)
    if not converged:
        raise ConvergenceError(
            f"link price iteration stalled after {iterations} rounds",
            residual=residual, iterations=iterations, best=(rates, state))
    return rates, state


def rate_spread(problem, state):
    """Largest disagreement between per-link copies of any path's rate.

    Only pairs that took part in the final solves (positive weight on a
    positively priced link) are compared; at a fixed point the spread
    collapses to the bisection tolerance.
    """
    problem = _as_problem(problem)
    mu = state.mu_vec
    alpha = np.array([state.alpha[(int(problem.path_ids[problem.pair_path[i]]),
                                   int(problem.link_ids[problem.pair_link[i]]))]
                      for i in range(problem.n_pairs)])
    sel = (alpha > 0.0) & (mu[problem.pair_link] > 0.0)
    if not np.any(sel):
        return 0.0
    hi = np.full(problem.n_paths, -np.inf)
    lo = np.full(problem.n_paths, np.inf)
    np.maximum.at(hi, problem.pair_path[sel], state.pair_rates[sel])
    np.minimum.at(lo, problem.pair_path[sel], state.pair_rates[sel])
    gaps = hi - lo
    return float(np.max(gaps[np.isfinite(gaps)], initial=0.0))


def dual_value(problem, costs, mu, phi_paths=None):
    """Lagrangian dual value of the coupled problem at prices mu.

    With phi fixed to the per-path duals this lower-bounds the sum of the
    per-link dual values, which in turn lower-bounds the primal optimum.
    """
    problem = _as_problem(problem)
    mu = np.asarray(mu, dtype=float)
    idx = np.arange(problem.n_paths)
    mu_path = np.zeros(problem.n_paths)
    np.add.at(mu_path, problem.pair_path, mu[problem.pair_link])
    phi = np.zeros(problem.n_paths) if phi_paths is None else np.asarray(phi_paths)

    def g(r):
        return costs.slope(idx, r) + mu_path - phi

    g0 = g(np.zeros(problem.n_paths))
    hi = grow_upper(g, np.ones(problem.n_paths), "dual rate bracket")
    rlo, rhi = bisect_root(g, np.zeros(problem.n_paths), hi, 60)
    r = np.where(g0 >= 0.0, 0.0, 0.5 * (rlo + rhi))
    lag = (np.sum(costs.value(idx, r)) + np.sum((mu_path - phi) * r)
           - float(mu @ problem.capacities))
    return float(lag)


def split_dual_value(problem, costs, mu, alpha=None):
    """Sum of the per-link dual optima at prices mu.

    Each pair contributes min over r >= 0 of alpha psi(r) + mu r; the weights
    default to the price shares of mu itself.  By weak duality this never
    exceeds dual_value at the same prices, which never exceeds the primal
    optimum.
    """
    problem = _as_problem(problem)
    mu = np.asarray(mu, dtype=float)
    al = _alpha_pairs(problem, mu) if alpha is None else np.asarray(alpha)
    pp = problem.pair_path
    mu_pair = mu[problem.pair_link]
    active = al > 0.0
    fn = gather_slope(costs, pp)

    def g(r):
        return np.where(active, al * fn(r) + mu_pair, 1.0)

    zeros = np.zeros(problem.n_pairs)
    g0 = g(zeros)
    hi = grow_upper(g, np.ones(problem.n_pairs), "split dual bracket")
    rlo, rhi = bisect_root(g, zeros, hi, 60)
    r = np.where(g0 >= 0.0, 0.0, 0.5 * (rlo + rhi))
    r = np.where(active, r, 0.0)
    terms = np.where(active, al * costs.value(pp, r) + mu_pair * r, 0.0)
    return float(np.sum(terms) - mu @ problem.capacities)


def _surrogate_loop(problem, make_costs, config, r0=None):
    """Shared outer loop: rebuild a strict separable model around the current
    point, solve it, and stop once the rates settle."""
    problem = _as_problem(problem)
    r = np.zeros(problem.n_paths) if r0 is None else np.array(r0, dtype=float)
    mu = np.full(problem.n_links, config.mu_init)
    state = None
    for m in range(1, config.max_surrogate + 1):
        costs = make_costs(r)
        r_new, state = route_separable(problem, costs, config,
                                       mu0=np.maximum(mu, config.mu_init))
        mu = state.mu_vec
        move = float(np.linalg.norm(r_new - r))
        r = r_new
        if move < config.surrogate_tol * (1.0 + float(np.linalg.norm(r))):
            return r, state, m
    raise ConvergenceError(
        f"surrogate rate loop stalled after {config.max_surrogate} rounds",
        iterations=config.max_surrogate, best=(r, state))


def route_nonseparable(problem, joint, config=None, r0=None):
    """Rates for a smooth joint cost via quadratic majorisation.

    Around the current point the cost is replaced by its gradient plus a
    gamma/2 square term (gamma an upper bound on the gradient Lipschitz
    constant), which is separable and strict, and the priced solver is
    applied until the rates stop moving.
    """
    config = config or RoutingConfig()
    problem = _as_problem(problem)

    def make_costs(anchor):
        return QuadraticCosts(anchor, joint.grad(anchor),
                              np.full(problem.n_paths, joint.gamma))

    rates, _, _ = _surrogate_loop(problem, make_costs, config, r0=r0)
    return rates


def route_proximal(problem, costs, config=None, kappa=None, r0=None):
    """Rates for a merely convex separable cost via proximal regularisation.

    Each round solves the cost plus kappa/2 ||r - anchor||^2 exactly (the
    exact marginal cost is kept; only the square term is added) and moves the
    anchor, which converges to a minimiser of the original problem.
    """
    config = config or RoutingConfig()
    problem = _as_problem(problem)
    kap = config.kappa if kappa is None else float(kappa)

    def make_costs(anchor):
        return ProximalCosts(costs, kap, anchor)

    rates, _, _ = _surrogate_loop(problem, make_costs, config, r0=r0)
    return rates


def surrogate_rates(problem, make_costs, config=None, r0=None):
    """Run the surrogate loop with a caller-supplied model builder.

    Returns (rates, final RoutingDualState, rounds used).  This is the hook
    the joint solver's rate step uses; make_costs(anchor) must return a
    strict separable cost majorising the true objective at the anchor.
    """
    config = config or RoutingConfig()
    return _surrogate_loop(problem, make_costs, config, r0=r0)
