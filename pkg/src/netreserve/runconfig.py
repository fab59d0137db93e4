"""Run configuration: one JSON document driving models, solver knobs, and
experiment axes for the command-line entry points."""

import json
import math
from dataclasses import dataclass, field

from .bcd import BcdConfig
from .errors import ConfigError
from .models import build_models
from .network import validate_against_schema
from .ran import RanConfig
from .routing import RoutingConfig

DEFAULTS = {
    "seed": 0,
    "theta": None,
    "shared_downlinks": False,
    "algorithms": ["bcd"],
    "scenarios": 100,
    "demand_shift": 0.0,
    "sweep": {"budgets": [20.0], "eta_means": [2.0]},
    "solver": {},
}


@dataclass
class RunConfig:
    doc: dict
    workers: int = 1
    routing_trace: bool = False

    @classmethod
    def from_file(cls, path, workers=1):
        with open(path) as fh:
            doc = json.load(fh)
        return cls.from_dict(doc, workers=workers)

    @classmethod
    def from_dict(cls, doc, workers=1):
        validate_against_schema(doc, "runconfig.schema.json")
        merged = dict(DEFAULTS)
        merged.update(doc)
        solver = merged.get("solver") or {}
        return cls(doc=merged, workers=workers,
                   routing_trace=bool(solver.get("routing_trace", False)))

    @property
    def seed(self):
        return int(self.doc["seed"])

    @property
    def algorithms(self):
        return list(self.doc["algorithms"])

    @property
    def scenarios(self):
        return int(self.doc["scenarios"])

    @property
    def deterministic(self):
        return self.doc["channel"]["kind"] == "deterministic"

    def build_models(self, topology, eta_mean=None, eta_shift=0.0):
        demand = dict(self.doc["demand"])
        if eta_mean is not None:
            demand["eta_mean"] = float(eta_mean)
        if eta_shift:
            if demand.get("kind", "log-normal") != "log-normal":
                raise ConfigError("demand shift needs log-normal demand")
            demand["eta_mean"] = float(demand["eta_mean"]) + float(eta_shift)
        return build_models(topology, demand, self.doc["channel"])

    def scenario_models(self, topology):
        """Models the evaluation draws from: demand_shift scales mean demand."""
        shift = float(self.doc.get("demand_shift", 0.0) or 0.0)
        return self.build_models(topology,
                                 eta_shift=math.log1p(shift) if shift else 0.0)

    def bcd_config(self):
        s = dict(self.doc.get("solver") or {})
        routing = RoutingConfig(
            mu_init=s.get("mu_init", 1e-3),
            mu_tol=s.get("mu_tol", 1e-6),
            max_outer=s.get("max_outer", 500),
            bisect_iters=s.get("bisect_iters", 48),
            surrogate_tol=s.get("surrogate_tol", 1e-4),
            max_surrogate=s.get("max_surrogate", 200),
            kappa=s.get("kappa", 1e-2),
            workers=self.workers,
            trace=self.routing_trace,
        )
        ran = RanConfig(
            t_tol=s.get("ran_tol", 1e-6),
            max_iter=s.get("ran_max_iter", 200),
            bisect_iters=s.get("bisect_iters", 48),
            zeta_min=s.get("zeta_min", 1e-3),
            workers=self.workers,
        )
        return BcdConfig(
            tol=s.get("tol", 1e-4),
            max_iter=s.get("max_iter", 50),
            theta=self.doc.get("theta"),
            shared_downlinks=bool(self.doc.get("shared_downlinks", False)),
            deterministic=self.deterministic,
            routing=routing,
            ran=ran,
        )

    @property
    def sweep_budgets(self):
        return [float(b) for b in self.doc["sweep"]["budgets"]]

    @property
    def sweep_eta_means(self):
        return [float(e) for e in self.doc["sweep"]["eta_means"]]
