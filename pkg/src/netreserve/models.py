"""Demand and channel model sets aligned with a topology.

A ModelSet carries one demand distribution per user and one rate law per
downlink, remembering the ids it was built against so it can follow a
topology through path restriction.
"""

import numpy as np

from .errors import ConfigError
from .stochastic import (DeterministicChannel, LognormalDemand, PointMassDemand,
                         RayleighChannel, ray_cdf)


class ModelSet:
    def __init__(self, demands, channels, user_ids, downlink_ids):
        self.demands = list(demands)
        self.channels = list(channels)
        self.user_ids = [int(u) for u in user_ids]
        self.downlink_ids = [int(d) for d in downlink_ids]
        if len(self.demands) != len(self.user_ids):
            raise ConfigError("one demand model per user required")
        if len(self.channels) != len(self.downlink_ids):
            raise ConfigError("one channel model per downlink required")

    @property
    def all_deterministic(self):
        return all(getattr(c, "kind", "") == "deterministic" for c in self.channels)

    def mean_demands(self):
        return np.array([d.mean() for d in self.demands])

    def demand_cdf(self, totals):
        totals = np.asarray(totals, dtype=float)
        return np.array([d.cdf(x) for d, x in zip(self.demands, totals)])

    def downlink_rate_caps(self, t):
        """Deterministic capacity of each downlink at resources t (rate law value)."""
        t = np.asarray(t, dtype=float)
        return np.array([c.rate(x) if getattr(c, "kind", "") == "deterministic"
                         else c.upper_rate(x) for c, x in zip(self.channels, t)])

    def restrict(self, topology):
        """Re-align with a topology whose users/downlinks are a subset."""
        dem = {u: d for u, d in zip(self.user_ids, self.demands)}
        cha = {w: c for w, c in zip(self.downlink_ids, self.channels)}
        try:
            return ModelSet([dem[u.id] for u in topology.users],
                            [cha[d.id] for d in topology.downlinks],
                            [u.id for u in topology.users],
                            [d.id for d in topology.downlinks])
        except KeyError as exc:
            raise ConfigError(f"model set lacks entry for id {exc}") from exc


def lognormal_demands(topology, eta_mean, sigma, eta_spread=0.0):
    """Log-normal demand per user, log-mean shifted by the user's stored offset."""
    return [LognormalDemand(eta_mean + eta_spread * u.demand_offset, sigma)
            for u in topology.users]


def rayleigh_channels(topology):
    return [RayleighChannel(d.mean_snr) for d in topology.downlinks]


def spectral_channels(topology):
    """Fixed-rate downlinks at the stored spectral efficiency (rate = delta t)."""
    return [DeterministicChannel(delta=d.spectral_efficiency)
            for d in topology.downlinks]


def mean_rate_channels(topology, t_grid):
    """Deterministic downlinks pinned to the fading channel's mean rate curve.

    The curve is tabulated by quadrature of the rate survival function on
    t_grid and interpolated in between (it is linear in t, so the
    interpolation is exact up to the quadrature tolerance).
    """
    from .stochastic import _quad

    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] != 0.0:
        t_grid = np.concatenate([[0.0], t_grid])
    out = []
    for d in topology.downlinks:
        ch = RayleighChannel(d.mean_snr)
        vals = [0.0]
        for t in t_grid[1:]:
            top = ch.upper_rate(t)
            vals.append(_quad(lambda v: 1.0 - ray_cdf(v, t, d.mean_snr), 0.0, top,
                              points=ch.quad_points(t)))
        out.append(DeterministicChannel(curve=(t_grid, np.array(vals))))
    return out


def build_models(topology, demand_spec, channel_spec):
    """ModelSet from the two config mappings (see the run-config schema)."""
    kind = demand_spec.get("kind", "log-normal")
    if kind == "log-normal":
        demands = lognormal_demands(topology,
                                    float(demand_spec["eta_mean"]),
                                    float(demand_spec["sigma"]),
                                    float(demand_spec.get("eta_spread", 0.0)))
    elif kind == "point-mass":
        demands = [PointMassDemand(float(demand_spec["mass"]))
                   for _ in topology.users]
    else:
        raise ConfigError(f"unknown demand kind {kind!r}")
    ckind = channel_spec.get("kind", "rayleigh")
    if ckind == "rayleigh":
        channels = rayleigh_channels(topology)
    elif ckind == "deterministic":
        channels = spectral_channels(topology)
    else:
        raise ConfigError(f"unknown channel kind {ckind!r}")
    return ModelSet(demands, channels,
                    [u.id for u in topology.users],
                    [d.id for d in topology.downlinks])
