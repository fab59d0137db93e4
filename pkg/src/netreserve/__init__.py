"""Joint reservation of backhaul capacity and RAN transmission resources.

The package solves a two-block problem: how much rate to pre-book on each
candidate backhaul path of every user, and how much transmission resource to
pre-book on every wireless downlink, when demand and achievable rates are
random.  The reserved backhaul bundle is priced per link and solved fully in
parallel; the wireless side is handled by successive convex upper bounds; a
block-coordinate outer loop ties the two together.
"""

from .baselines import average_based_solve, single_path_solve
from .bcd import BcdConfig, BcdTrace, bcd_solve, objective, objective_parts, r_step
from .costs import (LinearCosts, ProximalCosts, QuadraticCosts,
                    QuadraticJointCost, SeparableJointCost, SurrogateCosts)
from .errors import (ConfigError, ConvergenceError, DomainError,
                     NetReserveError, StructureError)
from .evaluation import (EvaluationReport, Scenario, realize_scenario,
                         run_robustness, run_sweep, score_scenario, solve_with)
from .kde import KdeState, bandwidth, kde_eval, kde_init, kde_update
from .models import ModelSet, build_models
from .network import (AccessPoint, Downlink, Link, Node, Path, Reservation,
                      Topology, User, check_feasible, load_topology,
                      save_topology, topology_from_dict, topology_to_dict)
from .ran import (RanConfig, RanDualState, outage_t_derivative, project_budgets,
                  ran_bsum, solve_per_ap)
from .routing import (RoutingConfig, RoutingDualState, RoutingProblem,
                      compute_alpha, dual_value, rate_spread, route_nonseparable,
                      route_proximal, route_separable, solve_per_link,
                      split_dual_value)
from .runconfig import RunConfig
from .stochastic import (DeterministicChannel, EmpiricalDemand, LognormalDemand,
                         PointMassDemand, RayleighChannel, expected_min,
                         expected_min_derivative, expected_outage, shared_outage)
from .topogen import (TopologyParams, desk_params, generate_paper_topology,
                      generate_topology)

__version__ = "0.1.0"
