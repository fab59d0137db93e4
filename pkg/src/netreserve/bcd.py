"""Joint reservation of backhaul rates and RAN resources.

Alternates two blocks until the reservation stops moving: the rate block
solves a separable convex upper bound of the expected-shortfall objective
with the resources held fixed (priced multi-path routing inside), and the
resource block re-fits the AP allocations to the new rates (successive upper
bounds again).  The true objective

    sum_k E[min(sum_p r_k^p, d_k)] - sum theta O(r, t)

never decreases along the way, so the trace doubles as a correctness probe.

Deterministic mode drops the outage term: the downlink rate laws become hard
caps, enforced as per-flow bounds inside the per-link solves (virtual links
only where paths share a downlink), and the resource block degenerates to
keeping the (budget-projected) split.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .costs import SurrogateCosts
from .errors import ConvergenceError, StructureError
from .models import ModelSet
from .network import check_feasible
from .ran import RanConfig, project_budgets, ran_bsum
from .routing import RoutingConfig, RoutingProblem, route_separable
from .stochastic import (PointMassDemand, expected_min, expected_outage,
                         ray_cdf, shared_outage)


@dataclass(frozen=True)
class BcdConfig:
    tol: float = 1e-4            # combined squared movement of both blocks
    max_iter: int = 50
    theta: float = None          # scalar override of per-user outage weights
    shared_downlinks: bool = False
    deterministic: bool = False  # no-outage mode with rate-law caps
    feasibility_tol: float = 1e-9
    routing: RoutingConfig = field(default_factory=RoutingConfig)
    ran: RanConfig = field(default_factory=RanConfig)


@dataclass
class BcdTrace:
    """Per-iteration progress of the outer alternation."""

    rows: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    residual: float = float("inf")
    objective: float = float("-inf")
    wall_seconds: float = 0.0
    routing_rows: list = field(default_factory=list)  # (outer, round, j, |mu|, resid)

    HEADER = ("iteration", "objective", "move_r2", "move_t2",
              "rate_rounds", "resource_rounds")


def resolve_theta(topology, theta):
    if theta is None:
        return np.array(topology.user_theta, dtype=float)
    arr = np.asarray(theta, dtype=float)
    if arr.ndim == 0:
        return np.full(len(topology.users), float(arr))
    if arr.size != len(topology.users):
        raise StructureError("theta must be scalar or one weight per user")
    return arr


def objective_parts(topology, reservation, models, theta=None, shared=False,
                    deterministic=False, feasibility_tol=1e-9):
    """(expected supported traffic, weighted expected outage cost).

    Raises StructureError for an infeasible reservation (capacities, budgets,
    and in deterministic mode the downlink rate caps).
    """
    report = check_feasible(topology, reservation, tol=feasibility_tol)
    if not report.ok:
        worst = "; ".join(f"{kind} {ident} over by {amt:.3g}"
                          for kind, ident, amt in report.violations[:4])
        raise StructureError("infeasible reservation: " + worst)
    th = resolve_theta(topology, theta)
    r = topology.rate_vector(reservation)
    t = topology.resource_vector(reservation)
    totals = topology.user_rates(r)
    traffic = sum(expected_min(float(totals[k]), models.demands[k])
                  for k in range(len(topology.users)))
    if deterministic or models.all_deterministic:
        caps = models.downlink_rate_caps(t)
        dl = topology.downlink_rates(r)
        bad = dl > caps * (1.0 + feasibility_tol) + feasibility_tol
        if np.any(bad):
            w = int(np.argmax(bad))
            raise StructureError(
                f"downlink {topology.downlinks[w].id} rate {dl[w]:.6g} exceeds "
                f"its deterministic cap {caps[w]:.6g}")
        return float(traffic), 0.0
    cost = 0.0
    for w, ch in enumerate(models.channels):
        tw = float(t[w])
        thw = float(th[topology.downlink_user[w]])
        if thw == 0.0:
            continue
        if shared:
            cost += thw * shared_outage(
                [float(r[p]) for p in topology.downlink_paths[w]], tw, ch)
        else:
            for p in topology.downlink_paths[w]:
                cost += thw * expected_outage(float(r[p]), tw, ch)
    return float(traffic), float(cost)


def objective(topology, reservation, models, theta=None, shared=False,
              deterministic=False, feasibility_tol=1e-9):
    """Expected supported traffic minus weighted expected outage."""
    traffic, cost = objective_parts(topology, reservation, models, theta=theta,
                                    shared=shared, deterministic=deterministic,
                                    feasibility_tol=feasibility_tol)
    return traffic - cost


def _det_problem(topology, models, t):
    """Wired links plus the downlink rate law (deterministic mode).

    A downlink owned by a single path becomes a per-flow cap enforced inside
    the per-link solves; only downlinks shared by several paths need a
    virtual link, because there the law caps the rate sum.  Keeping caps out
    of the price iteration matters: hundreds of virtual links flipping
    between binding and slack as the anchors move make the price splits crawl.
    """
    dl_caps = models.downlink_rate_caps(t)
    upper = np.full(topology.n_paths, np.inf)
    caps = topology.capacities
    path_links = [np.asarray(lids) for lids in topology.path_links]
    link_ids = [l.id for l in topology.links]
    shared = [w for w, plist in enumerate(topology.downlink_paths)
              if plist.size > 1]
    for w, plist in enumerate(topology.downlink_paths):
        if plist.size == 1:
            upper[plist[0]] = dl_caps[w]
    if shared:
        n_l = topology.n_links
        caps = np.concatenate([caps, dl_caps[shared]])
        next_id = max(link_ids) + 1
        for j, w in enumerate(shared):
            for p in topology.downlink_paths[w]:
                path_links[p] = np.concatenate([path_links[p], [n_l + j]])
            link_ids.append(next_id + j)
    return RoutingProblem(caps, path_links, link_ids=link_ids,
                          path_ids=[p.id for p in topology.paths], upper=upper)


def r_step(topology, models, t_fixed, theta, config, r0=None, outer=0,
           mu0=None):
    """Rate block: successive separable upper bounds around the current rates.

    Each round freezes the demand term's gradient, keeps the outage CDF term
    exact in the path's own rate (frozen at the anchor sum for paths sharing
    a downlink), and damps with a bound on the demand density over the step.
    Returns (rates, info) with the routing iteration counts and the final
    link prices in info; feeding those prices back in as mu0 on the next
    outer pass skips rediscovering the binding set from scratch.
    """
    det = config.deterministic or models.all_deterministic
    problem = (_det_problem(topology, models, t_fixed) if det
               else RoutingProblem.from_topology(topology))
    n_paths = topology.n_paths
    a = np.zeros(n_paths) if r0 is None else np.array(r0, dtype=float)
    pu = topology.path_user
    pw = topology.path_downlink
    th_path = theta[pu]
    snr_path = topology.downlink_snr[pw]
    t_path = np.asarray(t_fixed, dtype=float)[pw]
    demands = models.demands
    # demand-term damping: paths-per-user times a bound on the demand density
    # over the step (the all-ones Hessian of the shortfall term has the
    # density as its top eigenvalue).  The density at the anchor is used
    # first; if a round then steps outside the region that value bounds, the
    # round is redone with the supremum over the realized step, so every
    # accepted round is a true upper-bound step.  The floor keeps the
    # per-path models strictly convex out in the flat demand tail.
    floor = 1e-3
    glob = np.array([max(d.pdf_max(), floor) for d in demands])
    ppu = topology.user_path_count
    n_w = np.array([len(v) for v in topology.downlink_paths], dtype=float)
    shared_path = config.shared_downlinks & (n_w[pw] > 1.0)
    pm_mass = np.array([d.mass if isinstance(d, PointMassDemand) else np.nan
                        for d in models.demands])
    if mu0 is None or np.asarray(mu0).size != problem.n_links:
        mu = np.full(problem.n_links, config.routing.mu_init)
    else:
        mu = np.asarray(mu0, dtype=float)
    info = {"rounds": 0, "routing_iterations": 0, "trace": []}
    state = None
    for m in range(1, config.routing.max_surrogate + 1):
        totals = topology.user_rates(a)
        base = models.demand_cdf(totals)[pu] - 1.0
        theta_z = np.where(det, 0.0, th_path)
        extra = 0.0
        if np.any(shared_path):
            z_anchor = ray_cdf(topology.downlink_rates(a)[pw], t_path, snr_path)
            base = base + np.where(shared_path, th_path * z_anchor, 0.0)
            extra = np.where(shared_path, th_path * n_w[pw], 0.0)
            theta_z = np.where(shared_path, 0.0, theta_z)
        # bound the density over everywhere a sane step can land: anchors past
        # the mode keep the sharp local value, anchors before it get the peak
        f_hat = np.array([max(d.pdf_bound(s, max(s, d.upper_tail())), floor)
                          for d, s in zip(demands, totals)])
        for attempt in range(4):
            if attempt == 3:
                f_hat = glob
            costs = SurrogateCosts(base, (ppu * f_hat)[pu] + extra, a,
                                   theta=theta_z, snr=snr_path, tres=t_path)
            err = None
            try:
                r_new, state = route_separable(
                    problem, costs, config.routing,
                    mu0=np.maximum(mu, config.routing.mu_init))
            except ConvergenceError as exc:
                # an over-optimistic curvature guess can send the prices into
                # a wall of spurious binding links; keep the best iterate just
                # long enough to learn the right bound from it
                err = exc
                r_new, state = exc.best
            mu = state.mu_vec
            info["routing_iterations"] += state.iterations
            if config.routing.trace:
                info["trace"].extend((outer, m, *row) for row in state.trace)
            r_new = _pm_damp(topology, pm_mass, a, r_new)
            s_new = topology.user_rates(r_new)
            need = np.array([d.pdf_bound(s0, s1)
                             for d, s0, s1 in zip(demands, totals, s_new)])
            bad = f_hat < need * (1.0 - 1e-12)
            if attempt == 3 or not np.any(bad):
                if err is not None:
                    raise err
                break
            f_hat = np.where(bad, np.maximum(need, floor), f_hat)
        move = float(np.linalg.norm(r_new - a))
        a = r_new
        info["rounds"] = m
        info["mu"] = mu
        if move < config.routing.surrogate_tol * (1.0 + float(np.linalg.norm(a))):
            info["state"] = state
            return a, info
    raise ConvergenceError(
        f"rate block stalled after {config.routing.max_surrogate} rounds",
        iterations=config.routing.max_surrogate, best=(a, info))


def _pm_damp(topology, pm_mass, a, r_new):
    """Land point-mass users exactly on their demand instead of stepping past it.

    The demand CDF is a step, so the frozen-gradient model keeps pushing a
    full unit once the total crosses the mass; scaling the step back to the
    kink is still a descent step and makes the block converge in one pass.
    """
    if np.all(np.isnan(pm_mass)):
        return r_new
    s_old = topology.user_rates(a)
    s_new = topology.user_rates(r_new)
    cross = (~np.isnan(pm_mass)) & (s_old < pm_mass) & (s_new > pm_mass)
    if not np.any(cross):
        return r_new
    factor = np.ones(len(pm_mass))
    factor[cross] = (pm_mass[cross] - s_old[cross]) / (s_new[cross] - s_old[cross])
    f_path = factor[topology.path_user]
    return a + f_path * (r_new - a)


def initial_split(topology):
    """Even split of each AP budget across its downlinks."""
    t = np.zeros(len(topology.downlinks))
    for ai, dls in enumerate(topology.ap_downlinks):
        if dls.size:
            t[dls] = topology.budgets[ai] / dls.size
    return t


def bcd_solve(topology, models, config=None):
    """Alternate the rate and resource blocks from a cold start.

    Returns (Reservation, BcdTrace).  If the movement test never fires within
    max_iter, the best iterate seen is returned with trace.converged False
    instead of raising.
    """
    config = config or BcdConfig()
    if isinstance(models, ModelSet) and len(models.user_ids) != len(topology.users):
        models = models.restrict(topology)
    theta = resolve_theta(topology, config.theta)
    det = config.deterministic or models.all_deterministic
    t = project_budgets(topology, initial_split(topology))
    r = np.zeros(topology.n_paths)
    trace = BcdTrace()
    start = time.perf_counter()
    best = None
    res = None
    obj = float("-inf")
    mu_prev = None
    for i in range(1, config.max_iter + 1):
        r_new, rinfo = r_step(topology, models, t, theta, config, r0=r, outer=i,
                              mu0=mu_prev)
        mu_prev = rinfo.get("mu")
        t_new, ran_state = ran_bsum(
            topology, r_new, t, theta, config.ran,
            channels=models.channels, shared=config.shared_downlinks)
        move_r2 = float(np.linalg.norm(r_new - r)) ** 2
        move_t2 = float(np.linalg.norm(t_new - t)) ** 2
        move = move_r2 + move_t2
        r, t = r_new, t_new
        res = topology.make_reservation(r, t)
        obj = objective(topology, res, models, theta=theta,
                        shared=config.shared_downlinks, deterministic=det,
                        feasibility_tol=config.feasibility_tol)
        trace.rows.append((i, obj, move_r2, move_t2,
                           rinfo["rounds"], ran_state.iterations))
        trace.routing_rows.extend(rinfo["trace"])
        trace.iterations = i
        trace.residual = move
        if best is None or obj > best[0]:
            best = (obj, res)
        if move < config.tol:
            trace.converged = True
            break
    trace.wall_seconds = time.perf_counter() - start
    if trace.converged:
        trace.objective = obj
        return res, trace
    trace.objective, out = best
    return out, trace
