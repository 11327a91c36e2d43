"""Command-line experiment runner.

Subcommands: ``solve``, ``sweep``, ``compare`` and ``threshold``.  Solve
results are cached in a content-addressed store so that sweeps can resume
and reruns reproduce identical CSV bodies.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .chain import arr_revenue
from .errors import ArrMdpError, BracketFailure, BracketInvalid, InvalidParams, SolverFailure
from .mdp import ArrMdp, first_action_policy, load_mdp
from .models import FAMILIES, ModelSpec
from .pto import PtoSolveConfig, solve_pto
from .solvers import OsmConfig, monte_carlo_revenue, osm_solve
from .threshold import find_threshold

log = logging.getLogger("arrmdp")

EXIT_OK, EXIT_FAILURE, EXIT_NOT_CONVERGED, EXIT_DISAGREE, EXIT_USAGE = 0, 1, 2, 3, 64
AGREEMENT_TOL = 1e-4
SIG_DIGITS = 10


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- result store ------------------------------------------------------------

def results_dir() -> Path:
    return Path(os.environ.get("ARRMDP_RESULTS_DIR", Path.home() / ".cache" / "arrmdp"))


def store_key(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def store_get(key: str) -> dict | None:
    path = results_dir() / key[:2] / f"{key}.json"
    if path.exists():
        return json.loads(path.read_text())
    return None


def store_put(key: str, record: dict) -> None:
    path = results_dir() / key[:2] / f"{key}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(record, sort_keys=True))
    tmp.replace(path)


# -- single solve --------------------------------------------------------------

def _model_payload(args_like: dict) -> dict:
    if args_like.get("model_file"):
        text = Path(args_like["model_file"]).read_bytes()
        return {"file_sha256": hashlib.sha256(text).hexdigest()}
    spec = ModelSpec(args_like["model"], args_like["max_fork"], args_like.get("gamma") or 0.0)
    return {**spec.to_json(), "alpha": args_like["alpha"]}


def _build(point: dict) -> tuple[ArrMdp, ModelSpec | None]:
    if point.get("model_file"):
        return load_mdp(point["model_file"]), None
    spec = ModelSpec(point["model"], point["max_fork"], point.get("gamma") or 0.0)
    return spec.build(point["alpha"]), spec


def solve_point(point: dict, use_cache: bool = True) -> dict:
    """Solve one configuration and return a JSON-ready record.

    ``point`` holds model fields (model, alpha, gamma, max_fork or model_file)
    and solver fields (solver, horizon, stop_threshold, linear_solver, policy,
    epsilon).
    """
    payload = {"model": _model_payload(point),
               "solver": {k: point.get(k) for k in ("solver", "horizon", "stop_threshold",
                                                     "linear_solver", "policy", "epsilon",
                                                     "max_iterations", "mc_steps", "seed")},
               "version": __version__}
    key = store_key(payload)
    if use_cache:
        cached = store_get(key)
        if cached is not None:
            return cached

    mdp, spec = _build(point)
    record = {"key": key, "model": payload["model"], "solver": payload["solver"],
              "num_states": mdp.num_states}
    if point.get("policy") == "honest":
        if spec is None:
            policy = first_action_policy(mdp)
        else:
            policy = spec.honest(mdp)
        report = {"iterations": 0, "linear_solves": 0, "wall_time_s": 0.0,
                  "objective": None, "converged": True}
    elif point["solver"] == "pto":
        cfg = PtoSolveConfig(horizon=point["horizon"], pi_stop_threshold=point["stop_threshold"],
                             max_pi_iterations=point.get("max_iterations", 200),
                             linear_solver=point["linear_solver"])
        policy, rep = solve_pto(mdp, cfg)
        report = rep.to_json()
    else:
        cfg = OsmConfig(epsilon=point["epsilon"], pi_stop_threshold=point["stop_threshold"],
                        max_pi_iterations=point.get("max_iterations", 200),
                        linear_solver=point["linear_solver"])
        policy, rep = osm_solve(mdp, cfg)
        report = rep.to_json()
    breakdown = arr_revenue(mdp, policy, method=point["linear_solver"])
    record["report"] = report
    record["revenue"] = breakdown.to_json()
    record["policy"] = {"choice": policy.choice.tolist(), "actions": list(mdp.action_names)}
    if point.get("mc_steps"):
        est, se = monte_carlo_revenue(mdp, policy, steps=point["mc_steps"], seed=point["seed"])
        record["monte_carlo"] = {"estimate": est, "std_error": se, "steps": point["mc_steps"],
                                 "seed": point["seed"]}
    store_put(key, record)
    return record


# -- CSV helpers ---------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, bool) or x is None:
        return "" if x is None else str(x).lower()
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return format(x, f".{SIG_DIGITS}g")
    return str(x)


def _write_csv(path: str | None, meta: str, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    buf.write(f"# {meta} generated={_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    text = buf.getvalue()
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


# -- commands ----------------------------------------------------------------------

def _point_from_args(args) -> dict:
    return {"model": args.model, "model_file": getattr(args, "model_file", None),
            "alpha": args.alpha, "gamma": args.gamma, "max_fork": args.max_fork,
            "solver": getattr(args, "solver", "pto"), "horizon": args.horizon,
            "stop_threshold": args.stop_threshold, "linear_solver": args.linear_solver,
            "policy": getattr(args, "policy", "optimal"), "epsilon": args.epsilon,
            "max_iterations": args.max_iterations,
            "mc_steps": getattr(args, "mc_steps", 0), "seed": args.seed}


def cmd_solve(args) -> int:
    record = solve_point(_point_from_args(args), use_cache=not args.fresh)
    text = json.dumps(record["report"] | {"revenue": record["revenue"]} |
                      {k: record[k] for k in ("model", "solver", "num_states", "key")} |
                      ({"monte_carlo": record["monte_carlo"]} if "monte_carlo" in record else {}),
                      indent=2)
    if args.out in (None, "-"):
        print(text)
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    log.info("rev_arr=%.10g", record["revenue"]["rev"])
    return EXIT_OK if record["report"]["converged"] else EXIT_NOT_CONVERGED


SWEEP_AXES = {"alpha": "alpha", "horizon": "horizon", "max_fork": "max_fork"}


def _run_points(points: list[dict], jobs: int, use_cache: bool):
    """Yield records in input order; parallel workers may finish in any order."""
    if jobs <= 1 or len(points) <= 1:
        for p in points:
            yield solve_point(p, use_cache)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(solve_point, p, use_cache) for p in points]
        for f in futures:
            yield f.result()


def cmd_sweep(args) -> int:
    axis = args.axis
    values = sorted(_parse_values(args.values, int if axis == "max_fork" else float))
    base = _point_from_args(args)
    points = [{**base, axis: v} for v in values]
    header = ["model", "alpha", "gamma", "max_fork", "horizon", "solver", "rev_arr", "rev_pt",
              "iterations", "linear_solves", "wall_time", "normalized_revenue"]
    rows, records = [], []
    status = EXIT_OK
    try:
        for rec in _run_points(points, args.jobs, not args.fresh):
            records.append(rec)
    except ArrMdpError as exc:
        log.error("sweep stopped after %d of %d points: %s", len(records), len(points), exc)
        status = EXIT_FAILURE
    best: dict[float, float] = {}
    for p, rec in zip(points, records):
        best[p["alpha"]] = max(best.get(p["alpha"], float("-inf")), rec["revenue"]["rev"])
    for p, rec in zip(points, records):
        rep = rec["report"]
        rev = rec["revenue"]["rev"]
        rows.append([p["model"], float(p["alpha"]), float(p["gamma"] or 0.0), int(p["max_fork"]),
                     float(p["horizon"]), p["solver"], rev, rep.get("rev_pt"), rep["iterations"],
                     rep["linear_solves"], float(rep["wall_time_s"]), rev / best[p["alpha"]]])
        if not rep["converged"] and status == EXIT_OK:
            status = EXIT_NOT_CONVERGED
    _write_csv(args.out, f"arrmdp sweep axis={axis}", header, rows)
    return status


def cmd_compare(args) -> int:
    forks = _parse_values(args.max_fork_list, int) if args.max_fork_list else [args.max_fork]
    header = ["max_fork", "alpha", "solver", "linear_solves", "iterations", "wall_time", "revenue",
              "solve_ratio"]
    rows, diffs = [], []
    for fork in forks:
        base = {**_point_from_args(args), "max_fork": fork, "policy": "optimal"}
        pto = solve_point({**base, "solver": "pto"}, not args.fresh)
        osm = solve_point({**base, "solver": "osm"}, not args.fresh)
        ratio = osm["report"]["linear_solves"] / max(pto["report"]["linear_solves"], 1)
        for name, rec in (("pto", pto), ("osm", osm)):
            rep = rec["report"]
            rows.append([fork, float(args.alpha), name, rep["linear_solves"], rep["iterations"],
                         float(rep["wall_time_s"]), rec["revenue"]["rev"], ratio])
        gap = abs(pto["revenue"]["rev"] - osm["revenue"]["rev"])
        if gap > AGREEMENT_TOL:
            diffs.append(f"max_fork={fork}: pto={pto['revenue']['rev']:.10g} "
                         f"osm={osm['revenue']['rev']:.10g} |diff|={gap:.3g}")
    _write_csv(args.out, "arrmdp compare", header, rows)
    if diffs:
        print("revenue disagreement beyond %g:\n  %s" % (AGREEMENT_TOL, "\n  ".join(diffs)),
              file=sys.stderr)
        return EXIT_DISAGREE
    return EXIT_OK


def cmd_threshold(args) -> int:
    spec = ModelSpec(args.model, args.max_fork, args.gamma or 0.0)
    cfg = PtoSolveConfig(horizon=args.horizon, pi_stop_threshold=args.stop_threshold,
                         linear_solver=args.linear_solver)
    res = find_threshold(spec, cfg, (args.lo, args.hi), tol=args.tol, margin=args.margin)
    text = json.dumps(res.to_json(), indent=2)
    if args.out in (None, "-"):
        print(text)
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    return EXIT_OK


# -- parsing ------------------------------------------------------------------------

def _parse_values(text: str, kind) -> list:
    """Comma list ``a,b,c`` or range ``start:stop:num`` (inclusive, linear)."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        start, stop, num = text.split(":")
        n = int(num)
        if n <= 0:
            return []
        step = (float(stop) - float(start)) / (n - 1) if n > 1 else 0.0
        return [kind(float(start) + i * step) for i in range(n)]
    return [kind(float(v)) for v in text.split(",") if v.strip()]


def _probability(text: str) -> float:
    x = float(text)
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return x


def _positive(text: str) -> float:
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"{text} must be positive")
    return x


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--model", choices=FAMILIES + ("file",), default="bitcoin")
    common.add_argument("--model-file", help="JSON model, used with --model file")
    common.add_argument("--alpha", type=_probability, default=0.4)
    common.add_argument("--gamma", type=_probability, default=0.0)
    common.add_argument("--max-fork", type=int, default=20)
    common.add_argument("--horizon", type=_positive, default=1e6)
    common.add_argument("--stop-threshold", type=_positive, default=1e-5)
    common.add_argument("--epsilon", type=_positive, default=1e-5,
                        help="rho bracket width for the bisection solver")
    common.add_argument("--max-iterations", type=int, default=200,
                        help="policy-iteration cap per solve")
    common.add_argument("--linear-solver", choices=("direct", "iterative"), default="direct")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--fresh", action="store_true", help="ignore cached results")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="arrmdp", description="Ratio-objective MDP solvers for selfish mining.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", parents=[common])
    p.add_argument("--solver", choices=("pto", "osm"), default="pto")
    p.add_argument("--policy", choices=("optimal", "honest"), default="optimal")
    p.add_argument("--mc-steps", type=int, default=0, help="also run a Monte Carlo check")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", parents=[common])
    p.add_argument("--axis", choices=tuple(SWEEP_AXES), required=True)
    p.add_argument("--values", required=True, help="a,b,c or start:stop:num")
    p.add_argument("--solver", choices=("pto", "osm"), default="pto")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", parents=[common])
    p.add_argument("--max-fork-list", default=None, help="compare at several fork lengths")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("threshold", parents=[common])
    p.add_argument("--lo", type=float, default=0.2)
    p.add_argument("--hi", type=float, default=0.4)
    p.add_argument("--tol", type=_positive, default=1e-4)
    p.add_argument("--margin", type=float, default=1e-6)
    p.set_defaults(func=cmd_threshold)
    return parser


def _check_args(args) -> None:
    if args.model == "file":
        if not args.model_file:
            raise UsageError("--model file needs --model-file")
        if args.command in ("sweep", "threshold") and getattr(args, "axis", None) != "horizon":
            raise UsageError(f"{args.command} needs a model family, not a file")
    if args.model != "file" and args.max_fork < 2:
        raise UsageError("--max-fork must be at least 2")
    if args.model != "file" and args.alpha >= 0.5:
        raise UsageError("--alpha must be below 0.5")
    if args.max_iterations < 1:
        raise UsageError("--max-iterations must be at least 1")
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _check_args(args)
        return args.func(args)
    except (UsageError, InvalidParams, ValueError) as exc:
        print(f"arrmdp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverFailure, BracketFailure, BracketInvalid, ArrMdpError) as exc:
        print(f"arrmdp: solver failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
