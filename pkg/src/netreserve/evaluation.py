"""Monte-Carlo scoring of reservations against realized demand and rates.

One scenario is one joint draw of every user's demand and every downlink's
achievable rate at the reserved resources.  Scenario streams are driven by
(seed, scenario index) pairs through the same uniform draws for every
algorithm, so two reservations face literally the same randomness and their
score difference is paired.
"""

from dataclasses import dataclass, field

import numpy as np

from .baselines import average_based_solve, single_path_solve
from .bcd import bcd_solve, objective_parts
from .errors import ConfigError
from .parallel import run_spans

ALGORITHMS = ("bcd", "single-path", "average-based")


def solve_with(name, topology, models, config):
    if name == "bcd":
        return bcd_solve(topology, models, config)
    if name == "single-path":
        return single_path_solve(topology, models, config)
    if name == "average-based":
        return average_based_solve(topology, models, config)
    raise ConfigError(f"unknown algorithm {name!r}")


@dataclass
class Scenario:
    seed: object
    demands: np.ndarray      # realized per user
    capacities: np.ndarray   # realized per downlink at the reserved resources


def realize_scenario(topology, models, reservation, seed):
    """Draw one scenario for a reservation.

    The uniforms are consumed in a fixed order (users ascending, then
    downlinks ascending), so the same seed gives different reservations a
    common underlying draw.  Downlinks with zero reserved resource realize
    zero capacity.
    """
    rng = np.random.default_rng(seed)
    u_demand = rng.random(len(topology.users))
    u_rate = rng.random(len(topology.downlinks))
    demands = np.array([models.demands[k].quantile(u_demand[k])
                        for k in range(len(topology.users))])
    t = topology.resource_vector(reservation)
    caps = np.array([models.channels[w].quantile(u_rate[w], float(t[w]))
                     for w in range(len(topology.downlinks))])
    return Scenario(seed=seed, demands=demands, capacities=caps)


def score_scenario(topology, reservation, scenario):
    """Fraction of realized demand the reservation can actually carry.

    Each downlink's realized capacity is split across its paths in proportion
    to their reserved rates; a path delivers at most its own reservation, a
    user at most their demand.  Returns 1.0 when no demand materialized.
    """
    r = topology.rate_vector(reservation)
    dl_total = topology.downlink_rates(r)
    safe = np.where(dl_total > 0.0, dl_total, 1.0)
    share = r * (scenario.capacities[topology.path_downlink] / safe[topology.path_downlink])
    share = np.where(dl_total[topology.path_downlink] > 0.0, share, 0.0)
    delivered_paths = np.minimum(r, share)
    per_user = np.zeros(len(topology.users))
    np.add.at(per_user, topology.path_user, delivered_paths)
    delivered = np.minimum(per_user, scenario.demands)
    total_demand = float(np.sum(scenario.demands))
    if total_demand <= 0.0:
        return 1.0
    return float(np.sum(delivered) / total_demand)


@dataclass
class AlgorithmOutcome:
    name: str
    reservation: object
    converged: bool
    iterations: int
    objective: float
    expected_traffic: float
    expected_outage: float
    reserved_rate: float       # sum of path rates
    reserved_backhaul: float   # sum of reserved capacity over links
    reserved_bandwidth: float  # sum of downlink resources
    ratios: np.ndarray = None

    def ratio_cdf(self):
        x = np.sort(self.ratios)
        y = (np.arange(x.size) + 1.0) / x.size
        return x, y


@dataclass
class EvaluationReport:
    seed: int
    n_scenarios: int
    outcomes: dict = field(default_factory=dict)


def summarize(name, topology, models, reservation, trace, theta=None,
              shared=False, deterministic=False):
    traffic, cost = objective_parts(topology, reservation, models, theta=theta,
                                    shared=shared, deterministic=deterministic)
    r = topology.rate_vector(reservation)
    t = topology.resource_vector(reservation)
    return AlgorithmOutcome(
        name=name, reservation=reservation,
        converged=trace.converged, iterations=trace.iterations,
        objective=traffic - cost, expected_traffic=traffic, expected_outage=cost,
        reserved_rate=float(np.sum(r)),
        reserved_backhaul=float(np.sum(topology.link_loads(r))),
        reserved_bandwidth=float(np.sum(t)))


def run_robustness(topology, models, algorithms, n_scenarios, seed, config=None,
                   scenario_models=None, workers=1):
    """Solve once per algorithm, then score paired scenarios.

    scenario_models (default: the planning models) drives the realized draws,
    so planning under one demand assumption can be stressed against another.
    """
    from .bcd import BcdConfig

    config = config or BcdConfig()
    actual = models if scenario_models is None else scenario_models
    report = EvaluationReport(seed=int(seed), n_scenarios=int(n_scenarios))
    for name in algorithms:
        reservation, trace = solve_with(name, topology, models, config)
        out = summarize(name, topology, models, reservation, trace,
                        theta=config.theta, shared=config.shared_downlinks,
                        deterministic=config.deterministic)

        def span(a, b, reservation=reservation):
            vals = []
            for i in range(a, b):
                sc = realize_scenario(topology, actual, reservation, [int(seed), i])
                vals.append(score_scenario(topology, reservation, sc))
            return vals

        parts = run_spans(n_scenarios, max(1, workers), span)
        out.ratios = np.array([v for part in parts for v in part])
        report.outcomes[name] = out
    return report


def run_sweep(topology, make_models, budgets, eta_means, algorithms, config=None,
              progress=None):
    """Grid of solves: one row per (algorithm, budget, demand level).

    make_models(topology, eta_mean) supplies the planning models for a cell;
    budgets rescale every AP uniformly.
    """
    from .bcd import BcdConfig

    config = config or BcdConfig()
    rows = []
    for budget in budgets:
        topo_b = topology.with_budgets(float(budget))
        for eta in eta_means:
            models = make_models(topo_b, float(eta))
            for name in algorithms:
                reservation, trace = solve_with(name, topo_b, models, config)
                out = summarize(name, topo_b, models, reservation, trace,
                                theta=config.theta,
                                shared=config.shared_downlinks,
                                deterministic=config.deterministic)
                rows.append({
                    "algorithm": name,
                    "budget": float(budget),
                    "eta_mean": float(eta),
                    "objective": out.objective,
                    "expected_traffic": out.expected_traffic,
                    "expected_outage": out.expected_outage,
                    "reserved_rate": out.reserved_rate,
                    "reserved_backhaul": out.reserved_backhaul,
                    "reserved_bandwidth": out.reserved_bandwidth,
                    "converged": bool(trace.converged),
                    "iterations": int(trace.iterations),
                })
                if progress is not None:
                    progress(rows[-1])
    return rows
