"""Command-line driver: ``gkcascade {validate,generate,simulate,analyze,sweep}``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

from . import __version__
from .balance_sheets import accounting_from_dict
from .cascade import ShockSpec, solve_cascade, write_trajectory
from .degree_model import (
    edge_assortativity,
    graph_assortativity,
    model_from_dict,
    validate_consistency,
)
from .errors import CascadeError, DegenerateDegreeVariance, InconsistentModel
from .experiment import ALL_OUTPUTS, ExperimentSpec, evaluate_point, parse_range, run_experiment, write_table
from .montecarlo import SINGLE, run_ensemble, write_ensemble_csv
from .networks import four_class, simplex_grid, two_class
from .skeleton import GenerationConfig, generate, write_graph

OUTPUT_DIR_ENV = "GKCASCADE_OUTPUT_DIR"
log = logging.getLogger("gkcascade")


def _floats(text):
    return [float(x) for x in text.split(",")]


def _add_model_args(p):
    g = p.add_argument_group("network model")
    g.add_argument("--model", type=Path, help="model JSON file (in_degrees, out_degrees, P, Q)")
    g.add_argument("--builtin", choices=["sec61", "sec62"], default="sec61",
                   help="built-in family when --model is not given")
    g.add_argument("--a", type=float, default=0.5, help="sec61 node correlation a in [0, 1/2]")
    g.add_argument("--b", type=float, default=0.16, help="sec61 edge correlation b in [0, 1/5]")
    g.add_argument("--q", type=_floats, default=[0.25] * 4, help="sec62 simplex weights q1,q2,q3,q4")


def _add_accounting_args(p, gamma_default=0.035):
    g = p.add_argument_group("balance sheets")
    g.add_argument("--gamma", type=float, default=gamma_default, help="uniform buffer (GK weights 1/(5j))")
    g.add_argument("--accounting", type=Path, help="accounting JSON file (overrides --gamma)")


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _model(args):
    if args.model is not None:
        return model_from_dict(_load_json(args.model), check=False)
    if args.builtin == "sec62":
        return four_class(args.q)
    return two_class(args.a, args.b)


def _accounting(args, model):
    doc = _load_json(args.accounting) if args.accounting else {"gk": {"gamma": args.gamma}}
    return accounting_from_dict(doc, model)


@contextmanager
def _output(path, default_name):
    if path is None and os.environ.get(OUTPUT_DIR_ENV):
        path = Path(os.environ[OUTPUT_DIR_ENV]) / default_name
    if path is None or str(path) == "-":
        yield sys.stdout
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        yield fh
    log.info("wrote %s", path)


def cmd_validate(args):
    model = _model(args)
    violations = validate_consistency(model)
    report = {"z": model.z, "violations": [v._asdict() for v in violations]}
    for name, fn in (("r_q", edge_assortativity), ("r", graph_assortativity)):
        try:
            report[name] = fn(model)
        except (DegenerateDegreeVariance, CascadeError) as exc:
            report[name] = None
            report[f"{name}_error"] = str(exc)
    json.dump(report, sys.stdout, indent=1)
    sys.stdout.write("\n")
    if violations:
        print(f"error: {len(violations)} consistency violation(s)", file=sys.stderr)
        return 1
    return 0


def cmd_generate(args):
    model = _model(args)
    config = GenerationConfig(seed=args.seed, allow_self_loops=not args.no_self_loops,
                              allow_multi_edges=not args.no_multi_edges)
    graph = generate(args.n, model, config)
    with _output(args.out, "graph.txt") as fh:
        write_graph(graph, fh)
    log.info("generated %d nodes, %d edges; repairs %s", graph.n_nodes, graph.n_edges, graph.meta)
    return 0


def _shock(text, model):
    if text == SINGLE:
        return SINGLE
    return ShockSpec.uniform(model, float(text))


def cmd_simulate(args):
    model = _model(args)
    acct = _accounting(args, model)
    stats = run_ensemble(args.n, model, acct, _shock(args.shock, model), args.realizations,
                         args.seed, args.global_threshold, fresh_graph=not args.fixed_graph,
                         workers=args.workers)
    params = {"n": args.n, "gamma": args.gamma if not args.accounting else args.accounting,
              "shock": args.shock, "tool": f"gkcascade {__version__}"}
    with _output(args.out, "ensemble.csv") as fh:
        write_ensemble_csv(stats, fh, params)
    log.info("global frequency %.4f, mean global size %.4f over %d runs (%d failed)",
             stats.global_frequency, stats.mean_global_size, stats.n_realizations, stats.n_failed)
    return 0


def _spec_from_args(args, gammas):
    model_doc = _load_json(args.model) if args.model else None
    builtin = None if model_doc is not None else args.builtin
    kw = dict(builtin=builtin, model_doc=model_doc, gammas=gammas, rho0=args.rho0,
              outputs=args.outputs, n=args.n, realizations=args.realizations, seed=args.seed,
              workers=args.workers)
    if args.accounting:
        kw["accounting_doc"] = _load_json(args.accounting)
    return kw


def cmd_analyze(args):
    model = _model(args)  # fail fast: a bad single point is a validation error
    _accounting(args, model)
    kw = _spec_from_args(args, [args.gamma])
    kw.update(a_values=[args.a], b_values=[args.b], q_points=[tuple(args.q)])
    spec = ExperimentSpec(**kw)
    rows = [evaluate_point(spec, spec.points()[0])]
    if args.trajectory:
        sol = solve_cascade(model, _accounting(args, model), ShockSpec.uniform(model, args.rho0))
        with open(args.trajectory, "w") as fh:
            write_trajectory(sol, fh)
    with _output(args.out, "analysis.csv") as fh:
        write_table(spec, rows, fh, args.format, layout=args.layout)
    return 0


def cmd_sweep(args):
    gammas = parse_range(args.gamma_range) if args.gamma_range else [args.gamma]
    kw = _spec_from_args(args, gammas)
    kw["a_values"] = parse_range(args.a_range) if args.a_range else [args.a]
    kw["b_values"] = parse_range(args.b_range) if args.b_range else [args.b]
    if args.builtin == "sec62" and (args.simplex_face is not None or args.resolution):
        kw["q_points"] = simplex_grid(args.resolution or 21, args.simplex_face)
    else:
        kw["q_points"] = [tuple(args.q)]
    spec = ExperimentSpec(**kw)
    rows = run_experiment(spec)
    with _output(args.out, "sweep." + args.format) as fh:
        write_table(spec, rows, fh, args.format, layout=args.layout)
    failed = sum(1 for r in rows if r.get("error"))
    log.info("%d grid points, %d with errors", len(rows), failed)
    return 0


def _outputs(text):
    names = [x.strip() for x in text.split(",") if x.strip()]
    bad = [x for x in names if x not in ALL_OUTPUTS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown outputs {bad}; choose from {', '.join(ALL_OUTPUTS)}")
    return names


def build_parser():
    parser = argparse.ArgumentParser(prog="gkcascade", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model's consistency and assortativity")
    _add_model_args(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("generate", help="draw one finite skeleton graph")
    _add_model_args(p)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-self-loops", action="store_true")
    p.add_argument("--no-multi-edges", action="store_true")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="Monte Carlo ensemble of cascades")
    _add_model_args(p)
    _add_accounting_args(p)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--realizations", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shock", default=SINGLE, help="'single' or a uniform seed probability")
    p.add_argument("--global-threshold", type=float, default=0.05)
    p.add_argument("--fixed-graph", action="store_true", help="reuse one graph, vary only the shock")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_simulate)

    for name, func, help_ in (("analyze", cmd_analyze, "analytic quantities at one point"),
                              ("sweep", cmd_sweep, "analytic (and optional Monte Carlo) grid sweep")):
        p = sub.add_parser(name, help=help_)
        _add_model_args(p)
        _add_accounting_args(p)
        p.add_argument("--rho0", type=float, default=1e-4, help="uniform seed probability for cascade size")
        p.add_argument("--outputs", type=_outputs, default=["radius", "gamma_c", "size", "frequency", "r_q", "r"],
                       help=f"comma list from: {', '.join(ALL_OUTPUTS)}")
        p.add_argument("--n", type=int, default=10_000)
        p.add_argument("--realizations", type=int, default=500)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--layout", choices=["wide", "long"], default="wide",
                       help="one column per quantity, or one row per (point, quantity)")
        p.add_argument("--out", type=Path)
        p.set_defaults(func=func)
        if name == "analyze":
            p.add_argument("--trajectory", type=Path, help="also write the recursion trajectory CSV")
        else:
            p.add_argument("--gamma-range", help="lo:hi:step or comma list")
            p.add_argument("--a-range", help="sec61 a grid, lo:hi:step or comma list")
            p.add_argument("--b-range", help="sec61 b grid, lo:hi:step or comma list")
            p.add_argument("--simplex-face", type=int, choices=[1, 2, 3, 4],
                           help="sec62: scan the face where q_i = 0")
            p.add_argument("--resolution", type=int, help="sec62: grid points per simplex edge (default 21)")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InconsistentModel as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CascadeError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
