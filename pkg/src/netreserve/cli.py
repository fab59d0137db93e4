"""Command-line front end.

Subcommands map one-to-one onto the library: generate (synthetic topologies),
solve (one reservation report), sweep (budget x demand grid), estimate
(recursive density from observations), evaluate (paired Monte-Carlo scoring).

Exit codes: 0 success, 2 configuration or validation problem, 3 solver hit an
iteration cap (outputs are still written, from the best iterate), 4 I/O
failure.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .errors import ConfigError, ConvergenceError, DomainError, NetReserveError
from .evaluation import run_robustness, run_sweep, solve_with, summarize
from .kde import kde_init, kde_update
from .network import dump_json, load_topology, save_topology, validate_against_schema
from .parallel import default_workers
from .runconfig import RunConfig
from .topogen import desk_params, generate_paper_topology, generate_topology

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3
EXIT_IO = 4

SWEEP_COLUMNS = ("algorithm", "budget", "eta_mean", "objective",
                 "expected_traffic", "expected_outage", "reserved_rate",
                 "reserved_backhaul", "reserved_bandwidth", "converged",
                 "iterations")


def build_parser():
    p = argparse.ArgumentParser(prog="netreserve",
                                description="joint backhaul and RAN reservation")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic topology JSON")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--preset", choices=("paper", "desk"), default="paper")
    g.add_argument("--users", type=int)
    g.add_argument("--aps", type=int)
    g.add_argument("--routers", type=int)
    g.add_argument("--budget", type=float)
    g.add_argument("--theta", type=float)
    g.add_argument("--capacity-scale", type=float)
    g.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="solve one instance and write a report")
    s.add_argument("--topology", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--algorithm", choices=("bcd", "single-path", "average-based"),
                   default="bcd")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--workers", type=int, default=None)

    w = sub.add_parser("sweep", help="solve a budget x demand grid, write CSV")
    w.add_argument("--topology", required=True)
    w.add_argument("--config", required=True)
    w.add_argument("--out-dir", required=True)
    w.add_argument("--workers", type=int, default=None)

    e = sub.add_parser("estimate", help="recursive density estimate from samples")
    e.add_argument("--observations", required=True,
                   help="text file, one observation per line")
    e.add_argument("--beta", type=float, default=1.0)
    e.add_argument("--grid-lo", type=float, default=None)
    e.add_argument("--grid-hi", type=float, default=None)
    e.add_argument("--grid-points", type=int, default=512)
    e.add_argument("--out", required=True)

    v = sub.add_parser("evaluate", help="paired Monte-Carlo scoring of algorithms")
    v.add_argument("--topology", required=True)
    v.add_argument("--config", required=True)
    v.add_argument("--scenarios", type=int, default=None)
    v.add_argument("--out-dir", required=True)
    v.add_argument("--workers", type=int, default=None)
    return p


def _workers(args):
    return args.workers if args.workers is not None else default_workers()


def cmd_generate(args):
    overrides = {}
    if args.users is not None:
        overrides["n_users"] = args.users
    if args.aps is not None:
        overrides["n_aps"] = args.aps
    if args.routers is not None:
        overrides["n_routers"] = args.routers
    if args.budget is not None:
        overrides["ap_budget"] = args.budget
    if args.theta is not None:
        overrides["theta"] = args.theta
    if args.capacity_scale is not None:
        overrides["capacity_scale"] = args.capacity_scale
    if args.preset == "paper":
        topo = generate_paper_topology(seed=args.seed, **overrides)
    else:
        topo = generate_topology(desk_params(seed=args.seed, **overrides))
    save_topology(topo, args.out)
    return EXIT_OK


def report_dict(name, topology, models, reservation, trace, config):
    out = summarize(name, topology, models, reservation, trace,
                    theta=config.theta, shared=config.shared_downlinks,
                    deterministic=config.deterministic)
    return {
        "version": 1,
        "algorithm": name,
        "converged": bool(trace.converged),
        "iterations": int(trace.iterations),
        "objective": out.objective,
        "expected_traffic": out.expected_traffic,
        "expected_outage": out.expected_outage,
        "totals": {
            "reserved_rate": out.reserved_rate,
            "reserved_backhaul": out.reserved_backhaul,
            "reserved_bandwidth": out.reserved_bandwidth,
        },
        "reservation": {
            "r": {str(k): float(v) for k, v in sorted(reservation.r.items())},
            "t": {str(k): float(v) for k, v in sorted(reservation.t.items())},
        },
        "trace": [
            {
                "iteration": int(row[0]),
                "objective": float(row[1]),
                "move_r2": float(row[2]),
                "move_t2": float(row[3]),
                "rate_rounds": int(row[4]),
                "resource_rounds": int(row[5]),
            }
            for row in trace.rows
        ],
    }


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trace.HEADER)
        for row in trace.rows:
            writer.writerow([row[0], repr(float(row[1])), repr(float(row[2])),
                             repr(float(row[3])), row[4], row[5]])


def write_routing_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("outer", "round", "iteration", "mu_norm", "residual"))
        for outer, rnd, j, mu_norm, resid in trace.routing_rows:
            writer.writerow([outer, rnd, j, repr(float(mu_norm)),
                             repr(float(resid))])


def cmd_solve(args):
    topology = load_topology(args.topology)
    runcfg = RunConfig.from_file(args.config, workers=_workers(args))
    models = runcfg.build_models(topology)
    config = runcfg.bcd_config()
    reservation, trace = solve_with(args.algorithm, topology, models, config)
    os.makedirs(args.out_dir, exist_ok=True)
    doc = report_dict(args.algorithm, topology, models, reservation, trace, config)
    validate_against_schema(doc, "report.schema.json")
    dump_json(doc, os.path.join(args.out_dir, "report.json"))
    write_trace_csv(trace, os.path.join(args.out_dir, "trace.csv"))
    if runcfg.routing_trace:
        write_routing_trace_csv(trace,
                                os.path.join(args.out_dir, "routing_trace.csv"))
    return EXIT_OK if trace.converged else EXIT_NONCONVERGED


def cmd_sweep(args):
    topology = load_topology(args.topology)
    runcfg = RunConfig.from_file(args.config, workers=_workers(args))
    config = runcfg.bcd_config()
    rows = run_sweep(
        topology,
        lambda topo, eta: runcfg.build_models(topo, eta_mean=eta),
        runcfg.sweep_budgets, runcfg.sweep_eta_means, runcfg.algorithms, config)
    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "sweep.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v)
                             for k, v in row.items()})
    if all(row["converged"] for row in rows):
        return EXIT_OK
    return EXIT_NONCONVERGED


def cmd_estimate(args):
    obs = np.loadtxt(args.observations, ndmin=1, dtype=float)
    if obs.size == 0:
        raise ConfigError("observation file is empty")
    lo = args.grid_lo if args.grid_lo is not None else float(np.min(obs)) - 1.0
    hi = args.grid_hi if args.grid_hi is not None else float(np.max(obs)) + 1.0
    if not hi > lo:
        raise ConfigError("density grid needs hi > lo")
    state = kde_init(lo, hi, n_points=args.grid_points, beta=args.beta)
    for x in obs:
        state = kde_update(state, float(x))
    doc = {
        "version": 1,
        "grid": [float(g) for g in state.grid],
        "density": [float(d) for d in state.density],
        "count": int(state.count),
        "beta": float(state.beta),
    }
    validate_against_schema(doc, "density.schema.json")
    dump_json(doc, args.out)
    return EXIT_OK


def cmd_evaluate(args):
    topology = load_topology(args.topology)
    runcfg = RunConfig.from_file(args.config, workers=_workers(args))
    config = runcfg.bcd_config()
    models = runcfg.build_models(topology)
    scenario_models = runcfg.scenario_models(topology)
    n = args.scenarios if args.scenarios is not None else runcfg.scenarios
    report = run_robustness(topology, models, runcfg.algorithms, n,
                            runcfg.seed, config=config,
                            scenario_models=scenario_models,
                            workers=_workers(args))
    doc = {"version": 1, "seed": report.seed, "scenarios": report.n_scenarios,
           "algorithms": {}}
    for name, out in report.outcomes.items():
        x, y = out.ratio_cdf()
        doc["algorithms"][name] = {
            "converged": bool(out.converged),
            "iterations": int(out.iterations),
            "objective": out.objective,
            "expected_traffic": out.expected_traffic,
            "expected_outage": out.expected_outage,
            "totals": {
                "reserved_rate": out.reserved_rate,
                "reserved_backhaul": out.reserved_backhaul,
                "reserved_bandwidth": out.reserved_bandwidth,
            },
            "ratio_median": float(np.median(out.ratios)),
            "ratio_mean": float(np.mean(out.ratios)),
            "cdf": {"ratio": [float(v) for v in x],
                    "probability": [float(v) for v in y]},
        }
    os.makedirs(args.out_dir, exist_ok=True)
    validate_against_schema(doc, "evaluation.schema.json")
    dump_json(doc, os.path.join(args.out_dir, "evaluation.json"))
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "generate": cmd_generate,
        "solve": cmd_solve,
        "sweep": cmd_sweep,
        "estimate": cmd_estimate,
        "evaluate": cmd_evaluate,
    }
    try:
        return handlers[args.command](args)
    except ConvergenceError as exc:
        print(f"netreserve: did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (ConfigError, DomainError) as exc:
        print(f"netreserve: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NetReserveError as exc:
        print(f"netreserve: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"netreserve: i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
