"""Reference run on P1: MONPG, MOPG and the weighted sum from x0 = (3.7990, 1.8743)."""

import argparse

import numpy as np

from monpg.problems import get_problem
from monpg.solvers import monpg_run, mopg_run, weighted_sum_run


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--x0", default="3.7990,1.8743")
    args = parser.parse_args()
    x0 = np.array([float(v) for v in args.x0.split(",")])
    p = get_problem("P1")
    np.set_printoptions(precision=4, suppress=True)

    res = monpg_run(p, x0)
    print("MONPG")
    print(f"{'k':>3} {'x':>20} {'F':>22} {'d':>20} {'t':>10} {'alpha':>7}")
    for k, rec in enumerate(res.trajectory):
        d = "" if rec.d is None else str(rec.d)
        t = "" if rec.t is None else f"{rec.t:.4f}"
        a = "" if rec.alpha is None else f"{rec.alpha:g}"
        print(f"{k:>3} {str(rec.x):>20} {str(rec.F):>22} {d:>20} {t:>10} {a:>7}")
    print(f"termination: {res.termination}, iterations: {res.iterations}\n")

    pg = mopg_run(p, x0)
    print(f"MOPG: {pg.termination} after {pg.iterations} iterations at x = {pg.x}")
    ws = weighted_sum_run(p, [0.18637886, 0.81362114], x0)
    print(f"WS (w = 0.1864, 0.8136): {ws.termination} after {ws.iterations} iterations at x = {ws.x}")


if __name__ == "__main__":
    main()
