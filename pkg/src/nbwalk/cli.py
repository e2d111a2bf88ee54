"""Command-line entry point: ``nbwalk <command> [options]``.

Results are JSON on stdout, or in ``--out`` with a run manifest written to
``<out>.manifest.json``. Exit codes: 0 success, 1 validation failure,
2 configuration error, 3 resource guard.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema

from . import __version__
from .census import DEFAULT_BUDGET, cogrowth, cycle_census, ramanujan_certificate
from .cover import lift_trace
from .montecarlo import DEFAULT_MAX_TRIALS, WalkConfig, WalkStuck, run_experiment, simulate_nbw, simulate_srw
from .multigraph import FamilySpec, FiniteOracle, Multigraph, ResourceGuardError, ball, load_graph, make_oracle, validate
from .spectral import DEFAULT_MAX_STATES, formula_residual, return_probabilities, rho_estimate, rho_from_cogrowth

EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_GUARD = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def jsonable(x):
    if isinstance(x, bytes):
        return x.hex()
    if isinstance(x, (list, tuple)):
        return [jsonable(y) for y in x]
    if isinstance(x, dict):
        return {str(jsonable(k)) if not isinstance(k, str) else k: jsonable(v) for k, v in x.items()}
    if hasattr(x, "item") and callable(x.item):
        return x.item()
    return x


def load_schema(name: str) -> dict:
    return json.loads(resources.files("nbwalk.schemas").joinpath(f"{name}.json").read_text())


def check_schema(name: str, payload: dict) -> None:
    jsonschema.validate(payload, load_schema(name))


def dumps(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# graph sources


def _family_from_args(args) -> Optional[dict]:
    if args.family is None:
        return None
    spec = {"family": args.family}
    for name in ("d", "L", "k", "m", "j"):
        val = getattr(args, name, None)
        if val is not None:
            spec[name] = val
    return spec


def graph_source(args):
    """(oracle, description) from --graph or --family."""
    if getattr(args, "graph", None):
        try:
            g = load_graph(args.graph)
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"cannot read graph {args.graph}: {exc}") from exc
        return FiniteOracle(g), {"graph": str(args.graph)}
    spec = _family_from_args(args)
    if spec is None:
        raise ConfigError("give --graph FILE or --family NAME")
    return make_oracle(spec), spec


def finite_graph(args) -> Multigraph:
    oracle, _ = graph_source(args)
    if not isinstance(oracle, FiniteOracle):
        raise ConfigError(f"{args.command} needs a finite graph")
    return oracle.graph


def parse_root(oracle, text):
    if text is None:
        return oracle.root
    if isinstance(oracle, FiniteOracle):
        for v in oracle.graph.vertices:
            if str(v) == text:
                return v
        raise ConfigError(f"unknown root {text!r}")
    try:
        v = bytes.fromhex(text)
    except ValueError as exc:
        raise ConfigError(f"oracle roots are hex-encoded keys, got {text!r}") from exc
    return v


# ---------------------------------------------------------------------------
# commands


def cmd_graph(args):
    if args.action == "validate":
        rep = validate(finite_graph(args))
        return "validation", rep.to_json(), (EXIT_OK if rep.ok else EXIT_INVALID)
    oracle, src = graph_source(args)
    out = {"source": src, "family": oracle.family, "regular": oracle.regular, "min_degree": oracle.min_degree}
    if isinstance(oracle, FiniteOracle):
        g = oracle.graph
        out.update(n_vertices=len(g.vertices), n_darts=len(g.darts), n_edges=g.n_edges, n_loops=g.n_loops,
                   degrees={str(v): g.degree(v) for v in g.vertices})
    else:
        bl = ball(oracle, oracle.root, args.radius, max_vertices=args.max_ball)
        out.update(radius=args.radius, n_vertices=len(bl.graph.vertices), n_darts=len(bl.graph.darts),
                   n_edges=bl.graph.n_edges, n_loops=bl.graph.n_loops, boundary=len(bl.boundary))
    return "graph_info", out, EXIT_OK


def cmd_census(args):
    oracle, src = graph_source(args)
    root = parse_root(oracle, args.root)
    if isinstance(oracle, FiniteOracle):
        g = oracle.graph
    else:
        g = ball(oracle, root, (args.N + 1) // 2, max_vertices=args.max_ball).graph
    cogr = None
    if args.with_bound:
        cogr = cogrowth(g).value
    census = cycle_census(g, root, args.N, budget=args.budget, cogr=cogr)
    out = census.to_json()
    out["source"] = src
    return "census", out, EXIT_OK


def cmd_cogrowth(args):
    oracle, src = graph_source(args)
    if isinstance(oracle, FiniteOracle):
        est = cogrowth(oracle.graph, tol=args.tol, max_iter=args.max_iter)
    else:
        est = cogrowth(oracle, radii=tuple(range(1, args.radius + 1)), max_ball=args.max_ball)
    out = est.to_json()
    out["source"] = src
    return "cogrowth", out, (EXIT_OK if est.converged else EXIT_INVALID)


def cmd_rho(args):
    oracle, src = graph_source(args)
    table = return_probabilities(oracle, parse_root(oracle, args.root), args.steps, max_states=args.max_ball)
    rep = rho_estimate(table)
    out = rep.to_json()
    out["source"] = src
    out["steps"] = args.steps
    out["method"] = table.method
    return "rho", out, EXIT_OK


def cmd_formula_check(args):
    g = finite_graph(args)
    d = g.regular_degree()
    if d is None:
        raise ConfigError("formula-check needs a regular graph")
    if not validate(g).connected:
        raise ConfigError("formula-check needs a connected graph")
    est = cogrowth(g)
    table = return_probabilities(g, g.vertices[0], args.steps)
    fit = rho_estimate(table)
    rho = 1.0  # every finite graph has spectral radius 1
    out = {
        "d": d,
        "cogrowth": est.value,
        "cogrowth_method": est.method,
        "rho": rho,
        "fitted_rho": fit.fitted_rho,
        "residual": formula_residual(rho, est.value, d),
        "residual_fitted": formula_residual(fit.fitted_rho, est.value, d),
    }
    if d >= 3:
        pred = rho_from_cogrowth(est.value, d)
        out["rho_from_cogrowth"] = pred.rho
        out["boundary"] = pred.boundary
    out["passed"] = out["residual"] < args.tol
    return "formula_check", out, (EXIT_OK if out["passed"] else EXIT_INVALID)


def cmd_ramanujan(args):
    oracle, src = graph_source(args)
    target = oracle.graph if isinstance(oracle, FiniteOracle) else oracle
    if isinstance(target, Multigraph) and target.regular_degree() is None:
        raise ConfigError("ramanujan-check needs a regular graph")
    roots = None if args.root is None else [parse_root(oracle, args.root)]
    cert = ramanujan_certificate(target, roots, args.N)
    out = cert.to_json()
    out["source"] = src
    return "ramanujan", out, (EXIT_OK if cert.passed else EXIT_INVALID)


def cmd_walk(args):
    oracle, src = graph_source(args)
    root = parse_root(oracle, args.root)
    sim = simulate_nbw if args.nb else simulate_srw
    path = sim(oracle, root, args.steps, args.seed)
    out = {
        "source": src,
        "walk": "nbw" if args.nb else "srw",
        "seed": args.seed,
        "start": jsonable(root),
        "darts": [jsonable(e.id) for e in path],
        "trace": jsonable(lift_trace(path).to_json()),
    }
    return "walk", out, EXIT_OK


def cmd_experiment(args):
    try:
        config = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    config = dict(config)
    walk = dict(config.get("walk", {}))
    if args.seed is not None:
        walk["seed"] = args.seed
    walk["workers"] = args.workers
    walk["max_trials"] = args.max_trials
    config["walk"] = walk
    report = run_experiment(config)
    if args.format == "csv":
        return "experiment", report, EXIT_OK
    return "experiment", jsonable(report.to_json(per_trial=args.per_trial)), EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_source(p, finite_only=False):
    p.add_argument("--graph", help="graph JSON file")
    if not finite_only:
        p.add_argument("--family", help="built-in family: regular_tree, looped_tree, tree_plus_cycle, cycle, complete, bouquet, petersen")
        for name in ("d", "L", "k", "m", "j"):
            p.add_argument(f"--{name}", type=int)
    else:
        p.set_defaults(family=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nbwalk", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the result here and a manifest beside it")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--max-ball", type=int, default=DEFAULT_MAX_STATES, help="ball / state-count guard")
    common.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="census guard on darts x N")
    common.add_argument("--max-trials", type=int, default=DEFAULT_MAX_TRIALS, help="trial-count guard")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("graph", parents=[common], help="validate or describe a graph")
    p.add_argument("action", choices=("validate", "info"))
    _add_source(p)
    p.add_argument("--radius", type=int, default=3, help="ball radius for infinite families")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("census", parents=[common], help="exact non-backtracking cycle counts at a root")
    _add_source(p)
    p.add_argument("--root")
    p.add_argument("--N", type=int, default=10)
    p.add_argument("--with-bound", action="store_true", help="add the constant bound for roots on a cycle")
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("cogrowth", parents=[common], help="cogrowth (finite) or its lower bound (infinite)")
    _add_source(p)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--radius", type=int, default=6)
    p.set_defaults(func=cmd_cogrowth)

    p = sub.add_parser("rho", parents=[common], help="spectral radius from exact return probabilities")
    _add_source(p)
    p.add_argument("--root")
    p.add_argument("--steps", type=int, default=400)
    p.set_defaults(func=cmd_rho)

    p = sub.add_parser("formula-check", parents=[common], help="cogrowth against rho = 1 on a finite regular graph")
    _add_source(p, finite_only=True)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_formula_check)

    p = sub.add_parser("ramanujan-check", parents=[common], help="b*_n <= 2 (d-1)^(n/2) up to depth N")
    _add_source(p)
    p.add_argument("--root")
    p.add_argument("--N", type=int, default=10)
    p.set_defaults(func=cmd_ramanujan)

    p = sub.add_parser("walk", parents=[common], help="simulate a walk and its cover lift")
    _add_source(p)
    p.add_argument("--root")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--nb", action="store_true", help="non-backtracking walk")
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("experiment", parents=[common], help="run a Monte Carlo experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--per-trial", action="store_true", help="include per-trial statistics in JSON")
    p.set_defaults(func=cmd_experiment)
    return ap


def write_outputs(args, schema: str, payload, started: str, argv) -> str:
    if args.format == "csv" and hasattr(payload, "to_csv"):
        text = payload.to_csv()
    else:
        if hasattr(payload, "to_json"):
            payload = jsonable(payload.to_json())
        check_schema(schema, payload)
        text = dumps(payload) + "\n"
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        manifest = {
            "command": args.command,
            "argv": list(argv),
            "config": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
            "version": __version__,
            "seed": args.seed,
            "started": started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "payload_sha256": hashlib.sha256(text.encode()).hexdigest(),
            "payload_file": out.name,
        }
        if args.command == "experiment":
            manifest["experiment_config"] = json.loads(Path(args.config).read_text())
            if manifest["seed"] is None:
                manifest["seed"] = manifest["experiment_config"].get("walk", {}).get("seed")
        check_schema("manifest", manifest)
        Path(f"{out}.manifest.json").write_text(dumps(manifest) + "\n")
    else:
        sys.stdout.write(text)
    return text


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    started = datetime.now(timezone.utc).isoformat()
    if args.seed is None and args.command == "walk":
        args.seed = 0
    try:
        schema, payload, code = args.func(args)
        write_outputs(args, schema, payload, started, argv)
        return code
    except ResourceGuardError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except WalkStuck as exc:
        print(f"walk error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except jsonschema.ValidationError as exc:
        print(f"output failed schema validation: {exc.message}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, ValueError, TypeError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
