"""Command line: list-problems, solve, pareto, compare, profile.

Exit codes: 0 success (critical for ``solve``), 2 max_iter, 3 failure or
empty front, 64 usage/config error or unknown problem.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import itertools
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, SolverSpec, load_experiment, load_problem
from .metrics import (EmptyFront, delta_spread, eval_accounting, extremes, hypervolume_mc, multi_start,
                      performance_profile, profile_csv, reference_box)
from .problem import InvalidArgument, MultiObjectiveProblem
from .problems import UnknownProblem, get_problem, problem_names
from .solvers import SolverConfig, monpg_run, mopg_run, weighted_sum_run

log = logging.getLogger("monpg")

EXIT_OK, EXIT_MAX_ITER, EXIT_FAILURE, EXIT_USAGE = 0, 2, 3, 64
OUTPUT_ENV = "MONPG_OUTPUT_DIR"
METRICS = ("delta", "hv", "iterations", "fevals")
# Larger hypervolume is better; profiles use its reciprocal.
INVERTED = {"hv"}


class UsageError(Exception):
    pass


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def header(digest: str, seed) -> str:
    return f"# monpg {__version__} config_sha256={digest} seed={seed}\n"


def output_dir(flag: str | None, configured: str | None = None) -> Path:
    path = Path(flag or os.environ.get(OUTPUT_ENV) or configured or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def resolve_problem(name: str) -> MultiObjectiveProblem:
    """Registry name, or a path to a JSON problem file."""
    if name.endswith(".json"):
        try:
            text = Path(name).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read problem file: {exc}") from None
        return load_problem(text, name)
    try:
        return get_problem(name)
    except UnknownProblem:
        raise UsageError(f"unknown problem {name!r}; see `monpg list-problems`") from None


def parse_vector(text: str, n: int, what: str) -> np.ndarray:
    try:
        v = np.array([float(s) for s in text.split(",")])
    except ValueError:
        raise UsageError(f"{what} must be {n} comma-separated reals, got {text!r}") from None
    if v.shape != (n,) or not np.all(np.isfinite(v)):
        raise UsageError(f"{what} must be {n} comma-separated finite reals, got {text!r}")
    return v


def solver_config(args) -> SolverConfig:
    opts = {}
    for key in ("beta", "r", "eps", "max_iter", "subproblem_tol", "max_backtracks", "derivatives", "ell"):
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    return SolverConfig.from_dict(opts)


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    log.info("wrote %s", path)


# ---------------------------------------------------------------- commands

def cmd_list_problems(args) -> int:
    for name in problem_names():
        p = get_problem(name)
        box = f"[{','.join(f'{v:g}' for v in p.lb)}]..[{','.join(f'{v:g}' for v in p.ub)}]"
        print(f"{name}\tm={p.m}\tn={p.n}\tbox={box}\tsigma_known={'yes' if p.sigma > 0 else 'no'}")
    return EXIT_OK


def cmd_solve(args) -> int:
    problem = resolve_problem(args.problem)
    x0 = parse_vector(args.x0, problem.n, "--x0")
    cfg = solver_config(args)
    if args.solver == "monpg":
        res = monpg_run(problem, x0, cfg)
    elif args.solver == "mopg":
        res = mopg_run(problem, x0, cfg)
    else:
        if args.weights is None:
            raise UsageError("--solver ws needs --weights")
        res = weighted_sum_run(problem, parse_vector(args.weights, problem.m, "--weights"), x0, cfg)
    digest = config_hash({"command": "solve", "problem": problem.name, "x0": x0.tolist(),
                          "solver": args.solver, "options": cfg.to_dict(), "weights": args.weights})
    out = res.to_dict()
    out["provenance"] = {"config_sha256": digest, "seed": None, "version": __version__}
    path = output_dir(args.output_dir) / f"solve_{problem.name}_{args.solver}.json"
    _write(path, json.dumps(out, indent=1) + "\n")
    fx = ", ".join(f"{v:.6g}" for v in res.F)
    print(f"{problem.name} {args.solver}: {res.termination} after {res.iterations} iterations, "
          f"x = [{', '.join(f'{v:.6g}' for v in res.x)}], F = [{fx}]")
    return {"critical": EXIT_OK, "max_iter": EXIT_MAX_ITER}.get(res.termination, EXIT_FAILURE)


def runs_csv(runs, m: int, head: str) -> str:
    buf = io.StringIO()
    buf.write(head)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["problem", "solver", "start_id", "termination", "iterations", "n_f", "n_grad", "n_hess",
                "d_norm"] + [f"x0_{i + 1}" for i in range(len(runs[0].x0))] + [f"F{j + 1}" for j in range(m)])
    for r in runs:
        c = r.counter
        w.writerow([r.problem, r.solver, r.start_id, r.termination, r.iterations, c.n_f, c.n_grad, c.n_hess,
                    repr(float(r.d_norm))] + [repr(float(v)) for v in r.x0] + [repr(float(v)) for v in r.F])
    return buf.getvalue()


def cmd_pareto(args) -> int:
    problem = resolve_problem(args.problem)
    cfg = solver_config(args)
    digest = config_hash({"command": "pareto", "problem": problem.name, "solver": args.solver,
                          "n_starts": args.n_starts, "seed": args.seed, "options": cfg.to_dict()})
    head = header(digest, args.seed)
    out = output_dir(args.output_dir)
    stem = f"{problem.name}_{args.solver}"
    try:
        front = multi_start(problem, args.solver, args.n_starts, args.seed, cfg, args.jobs)
    except EmptyFront as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    _write(out / f"front_{stem}.csv", front.to_csv(head))
    _write(out / f"runs_{stem}.csv", runs_csv(front.runs, problem.m, head))
    failed = sum(not r.success for r in front.runs)
    print(f"{problem.name} {args.solver}: {len(front)} nondominated points from {len(front.runs)} runs "
          f"({failed} failed)")
    return EXIT_OK


# ------------------------------------------------------- compare / profile

def _mean_counts(runs, n: int, method: str) -> tuple[float, float]:
    ok = [r for r in runs if r.success]
    if not ok:
        return float("inf"), float("inf")
    its = float(np.mean([r.iterations for r in ok]))
    fev = float(np.mean([eval_accounting(r.counter, n, method) for r in ok]))
    return its, fev


def run_experiment(cfg: ExperimentConfig, jobs: int, out: Path, head: str) -> dict:
    """Multi-start every (problem, solver); return {metric: problems x solvers matrix}."""
    names = [s.name for s in cfg.solvers]
    table = {k: np.full((len(cfg.problems), len(names)), np.inf) for k in METRICS}
    rows, refs = [], []
    for p_idx, pname in enumerate(cfg.problems):
        problem = get_problem(pname)
        fronts = {}
        for s_idx, spec in enumerate(cfg.solvers):
            try:
                front = multi_start(problem, spec.method, cfg.n_starts, cfg.seed, spec.config, jobs)
            except EmptyFront as exc:
                log.warning("%s", exc)
                continue
            fronts[spec.name] = front
            its, fev = _mean_counts(front.runs, problem.n, spec.method)
            table["iterations"][p_idx, s_idx] = its
            table["fevals"][p_idx, s_idx] = fev
            stem = f"{pname}_{spec.name}"
            _write(out / f"front_{stem}.csv", front.to_csv(head))
            _write(out / f"runs_{stem}.csv", runs_csv(front.runs, problem.m, head))
        if not fronts:
            continue
        lower, upper = extremes(fronts.values())
        ideal, ref = reference_box(fronts.values())
        log.info("%s: ideal = %s, P_ref = %s", pname, ideal.tolist(), ref.tolist())
        refs.append([pname] + [repr(float(v)) for v in ideal] + [repr(float(v)) for v in ref])
        for s_idx, spec in enumerate(cfg.solvers):
            front = fronts.get(spec.name)
            if front is None:
                continue
            table["delta"][p_idx, s_idx] = delta_spread(front.F, lower, upper)
            table["hv"][p_idx, s_idx] = hypervolume_mc(front.F, ref, ideal, cfg.hv_samples, cfg.seed)
    for p_idx, pname in enumerate(cfg.problems):
        for s_idx, sname in enumerate(names):
            rows.append([pname, sname] + [repr(float(table[k][p_idx, s_idx])) for k in METRICS])
    buf = io.StringIO()
    buf.write(head)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["problem", "solver", *METRICS])
    w.writerows(rows)
    _write(out / "metrics.csv", buf.getvalue())
    buf = io.StringIO()
    buf.write(head)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["problem", "ideal", "P_ref"])
    for r in refs:
        k = (len(r) - 1) // 2
        w.writerow([r[0], " ".join(r[1:1 + k]), " ".join(r[1 + k:])])
    _write(out / "reference.csv", buf.getvalue())
    return table


def read_metrics(path: Path) -> tuple[str, list, list, dict]:
    """Parse a metrics.csv back into (header line, problems, solvers, tables)."""
    text = path.read_text()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# monpg"):
        raise UsageError(f"{path}:1: missing provenance header")
    reader = csv.DictReader(lines[1:])
    data = list(reader)
    if not data or set(METRICS) - set(reader.fieldnames or ()):
        raise UsageError(f"{path}:2: expected columns problem, solver, {', '.join(METRICS)}")
    problems = list(dict.fromkeys(r["problem"] for r in data))
    solvers = list(dict.fromkeys(r["solver"] for r in data))
    tables = {k: np.full((len(problems), len(solvers)), np.inf) for k in METRICS}
    for r in data:
        for k in METRICS:
            tables[k][problems.index(r["problem"]), solvers.index(r["solver"])] = float(r[k])
    return lines[0] + "\n", problems, solvers, tables


def write_profiles(tables: dict, solvers: list, metrics, out: Path, head: str) -> list[Path]:
    paths = []
    for a, b in itertools.combinations(range(len(solvers)), 2):
        for k in metrics:
            curves = performance_profile(tables[k][:, [a, b]], [solvers[a], solvers[b]], invert=k in INVERTED)
            path = out / f"profile_{k}_{solvers[a]}_vs_{solvers[b]}.csv"
            _write(path, profile_csv(curves, head))
            paths.append(path)
    return paths


def _load_config(args) -> tuple[ExperimentConfig, str]:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    cfg = load_experiment(text, args.config, args.seed, set(problem_names()))
    if len(cfg.solvers) < 2:
        raise UsageError(f"{args.config}: compare/profile need at least 2 solvers")
    if args.n_starts is not None:
        cfg.n_starts = args.n_starts
    return cfg, config_hash(cfg.canonical())


def cmd_compare(args) -> int:
    cfg, digest = _load_config(args)
    out = output_dir(args.output_dir, cfg.output_dir)
    head = header(digest, cfg.seed)
    tables = run_experiment(cfg, args.jobs, out, head)
    write_profiles(tables, [s.name for s in cfg.solvers], cfg.metrics, out, head)
    if all(np.isinf(tables["iterations"]).all(axis=0)):
        return EXIT_FAILURE
    return EXIT_OK


def cmd_profile(args) -> int:
    if args.from_metrics:
        head, _, solvers, tables = read_metrics(Path(args.from_metrics))
        if f" seed={args.seed}" not in head:
            raise UsageError(f"{args.from_metrics}:1: seed in header differs from --seed {args.seed}")
        out = output_dir(args.output_dir)
        write_profiles(tables, solvers, METRICS, out, head)
        return EXIT_OK
    if not args.config:
        raise UsageError("profile needs a config file or --from-metrics")
    return cmd_compare(args)


# ------------------------------------------------------------------ parser

def _solver_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver options")
    g.add_argument("--beta", type=float)
    g.add_argument("--r", type=float)
    g.add_argument("--eps", type=float)
    g.add_argument("--max-iter", dest="max_iter", type=int)
    g.add_argument("--subproblem-tol", dest="subproblem_tol", type=float)
    g.add_argument("--max-backtracks", dest="max_backtracks", type=int)
    g.add_argument("--derivatives", choices=["analytic", "forward-difference"])
    g.add_argument("--ell", type=float, help="MOPG proximal parameter (default: L, else doubling)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="monpg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list-problems", help="registered test problems")

    p = sub.add_parser("solve", help="single run from x0; writes the RunResult JSON")
    p.add_argument("problem", help="registry name or path to a problem .json")
    p.add_argument("--x0", required=True, help="comma-separated start point")
    p.add_argument("--solver", choices=["monpg", "mopg", "ws"], default="monpg")
    p.add_argument("--weights", help="comma-separated simplex weights for --solver ws")
    p.add_argument("--output-dir")
    _solver_options(p)

    p = sub.add_parser("pareto", help="multi-start front of one solver")
    p.add_argument("problem")
    p.add_argument("--solver", choices=["monpg", "mopg", "ws"], default="monpg")
    p.add_argument("--n-starts", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--output-dir")
    _solver_options(p)

    for name, help_ in (("compare", "metrics and pairwise profiles from a JSON experiment config"),
                        ("profile", "pairwise performance profiles (from a config or a metrics.csv)")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", nargs="?" if name == "profile" else None)
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
        p.add_argument("--n-starts", type=int, help="override n_starts from the config")
        p.add_argument("--output-dir")
        if name == "profile":
            p.add_argument("--from-metrics", help="metrics.csv written by compare")
    return parser


COMMANDS = {"list-problems": cmd_list_problems, "solve": cmd_solve, "pareto": cmd_pareto,
            "compare": cmd_compare, "profile": cmd_profile}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if getattr(args, "jobs", 1) < 1 or getattr(args, "n_starts", 1) is not None and getattr(args, "n_starts", 1) < 1:
        print("error: --jobs and --n-starts must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
