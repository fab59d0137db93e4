"""Reference reservation schemes the joint solver is compared against.

Both reuse the full solver on a degraded problem: the single-path scheme
throws away all but one candidate path per user, the average-based scheme
throws away the distributions (mean demand, mean rate curve) before solving.
"""

import numpy as np

from .bcd import BcdConfig, bcd_solve
from .models import ModelSet, mean_rate_channels
from .stochastic import PointMassDemand


def best_paths(topology):
    """One path id per user: highest mean-SNR downlink, ties broken by fewer
    hops and then by lower path id."""
    keep = []
    for u in topology.users:
        ranked = sorted(
            u.paths,
            key=lambda pid: (
                -topology.downlink_snr[topology.path_downlink[topology.path_index[pid]]],
                len(topology.paths[topology.path_index[pid]].links),
                pid,
            ),
        )
        keep.append(ranked[0])
    return keep


def single_path_solve(topology, models, config=None):
    """Joint reservation restricted to each user's strongest path.

    Returns (Reservation, BcdTrace); the reservation only names the surviving
    paths and downlinks, everything else is implicitly zero.
    """
    sub = topology.restrict_paths(best_paths(topology))
    sub_models = models.restrict(sub)
    return bcd_solve(sub, sub_models, config)


def average_based_solve(topology, models, config=None, t_grid_points=9):
    """Joint reservation against averaged inputs.

    Demands collapse to their means, downlinks to their quadrature-tabulated
    mean rate curves; the deterministic solver mode then treats those curves
    as hard caps.  Reserved rates never exceed the mean demands.
    """
    config = config or BcdConfig()
    demands = [PointMassDemand(d.mean()) for d in models.demands]
    t_hi = float(np.max(topology.budgets)) if len(topology.aps) else 1.0
    channels = mean_rate_channels(topology, np.linspace(0.0, max(t_hi, 1e-6),
                                                        t_grid_points))
    avg = ModelSet(demands, channels, models.user_ids, models.downlink_ids)
    cfg = BcdConfig(tol=config.tol, max_iter=config.max_iter, theta=config.theta,
                    shared_downlinks=config.shared_downlinks, deterministic=True,
                    feasibility_tol=config.feasibility_tol,
                    routing=config.routing, ran=config.ran)
    return bcd_solve(topology, avg, cfg)
