"""Fronts of all three solvers on one problem, written as plot-ready CSV."""

import argparse
import os

from monpg.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("problem", nargs="?", default="P1")
    parser.add_argument("--n-starts", type=int, default=100)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--output-dir", default="results/fronts")
    args = parser.parse_args()
    for solver in ("monpg", "mopg", "ws"):
        code = cli_main(["pareto", args.problem, "--solver", solver, "--seed", str(args.seed),
                         "--n-starts", str(args.n_starts), "--jobs", str(args.jobs),
                         "--output-dir", args.output_dir])
        if code:
            return code
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
