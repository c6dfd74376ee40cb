"""MONPG vs MOPG vs weighted sum on the in-scope problem set.

Writes metrics.csv, reference.csv, fronts and pairwise profiles through the
same code path as ``monpg compare``, then prints a per-problem iteration table.
"""

import argparse
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from monpg.cli import main as cli_main, read_metrics
from monpg.problems import in_scope_comparison_set


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n-starts", type=int, default=100)
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--output-dir", default="results/inscope")
    parser.add_argument("--no-ws", action="store_true", help="compare MONPG and MOPG only")
    args = parser.parse_args()

    solvers = [{"name": "monpg", "method": "monpg"}, {"name": "mopg", "method": "mopg"}]
    if not args.no_ws:
        solvers.append({"name": "ws", "method": "ws"})
    config = {"problems": in_scope_comparison_set(), "solvers": solvers, "n_starts": args.n_starts}
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(config, fh, indent=1)
    try:
        code = cli_main(["-v", "compare", fh.name, "--seed", str(args.seed), "--jobs", str(args.jobs),
                         "--output-dir", args.output_dir])
    finally:
        os.unlink(fh.name)
    if code:
        return code

    _, problems, names, tables = read_metrics(Path(args.output_dir) / "metrics.csv")
    its = tables["iterations"]
    print(f"\n{'problem':<16}" + "".join(f"{n:>10}" for n in names))
    for i, p in enumerate(problems):
        print(f"{p:<16}" + "".join(f"{v:>10.2f}" for v in its[i]))
    a, b = names.index("monpg"), names.index("mopg")
    wins = int(np.sum(its[:, a] <= its[:, b]))
    print(f"\nMONPG needs no more mean iterations than MOPG on {wins}/{len(problems)} problems")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
