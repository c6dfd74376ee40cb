"""Multi-start fronts, Delta-spread, Monte-Carlo hypervolume, performance profiles."""

from __future__ import annotations

import csv
import io
import json
import multiprocessing as mp
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .problem import EvalCounter, InvalidArgument, MultiObjectiveProblem, nondominated_mask
from .solvers import SolverConfig, monpg_run, mopg_run, weight_grid, weighted_sum_run


class EmptyFront(RuntimeError):
    pass


def start_rng(seed: int, problem: str, solver: str, index: int) -> np.random.Generator:
    """Philox stream for start ``index``; keyed so any subset of starts is reproducible."""
    key = [int(seed), zlib.crc32(problem.encode()), zlib.crc32(solver.encode()), int(index)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


@dataclass
class Front:
    X: np.ndarray
    F: np.ndarray
    problem: str
    solver: str
    seed: int
    runs: list = field(default_factory=list)

    def __len__(self):
        return self.F.shape[0]

    def to_csv(self, header: str = "") -> str:
        buf = io.StringIO()
        if header:
            buf.write(header)
        w = csv.writer(buf, lineterminator="\n")
        n, m = self.X.shape[1], self.F.shape[1]
        w.writerow([f"x{i + 1}" for i in range(n)] + [f"F{j + 1}" for j in range(m)])
        for x, f in zip(self.X, self.F):
            w.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in f])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"problem": self.problem, "solver": self.solver, "seed": self.seed,
                           "X": self.X.tolist(), "F": self.F.tolist()})


def make_front(X, F, problem: str, solver: str, seed: int, runs=()) -> Front:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    F = np.atleast_2d(np.asarray(F, dtype=float))
    keep = nondominated_mask(F)
    return Front(X[keep], F[keep], problem, solver, seed, list(runs))


# Shared with forked workers; problems may hold closures that do not pickle.
_TASK: dict = {}


def _run_start(i: int):
    problem, solver, config, seed, weights = (_TASK[k] for k in ("problem", "solver", "config", "seed", "weights"))
    rng = start_rng(seed, problem.name, solver, i)
    x0 = rng.uniform(problem.lb, problem.ub)
    if solver == "monpg":
        res = monpg_run(problem, x0, config)
    elif solver == "mopg":
        res = mopg_run(problem, x0, config)
    else:
        res = weighted_sum_run(problem, weights[i], x0, config)
    res.start_id = i
    res.trajectory = []  # keeps worker results small
    return res


def multi_start(problem: MultiObjectiveProblem, solver: str = "monpg", n_starts: int = 100, seed: int = 0,
                config: SolverConfig | None = None, jobs: int = 1) -> Front:
    """Run ``solver`` from uniform random starts in the box; return the nondominated finals.

    For ``solver="ws"`` the runs use ``weight_grid(m, n_starts)``, one
    random start per weight. Results do not depend on ``jobs``.
    """
    if n_starts < 1:
        raise InvalidArgument("n_starts must be >= 1")
    if solver not in ("monpg", "mopg", "ws"):
        raise InvalidArgument(f"unknown solver {solver!r}")
    config = config or SolverConfig()
    weights = weight_grid(problem.m, n_starts) if solver == "ws" else None
    count = len(weights) if weights is not None else n_starts
    _TASK.update(problem=problem, solver=solver, config=config, seed=seed, weights=weights)
    try:
        if jobs > 1 and count > 1:
            with ProcessPoolExecutor(min(jobs, count), mp_context=mp.get_context("fork")) as pool:
                runs = list(pool.map(_run_start, range(count), chunksize=max(1, count // (4 * jobs))))
        else:
            runs = [_run_start(i) for i in range(count)]
    finally:
        _TASK.clear()
    ok = [r for r in runs if r.success]
    if not ok:
        raise EmptyFront(f"all {count} runs of {solver} on {problem.name} failed")
    return make_front([r.x for r in ok], [r.F for r in ok], problem.name, solver, seed, runs)


def extremes(fronts) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise min and max over the union of the given fronts."""
    allF = np.vstack([f.F if isinstance(f, Front) else np.atleast_2d(f) for f in fronts])
    return allF.min(axis=0), allF.max(axis=0)


def delta_spread(values, lower, upper) -> float:
    """Delta-spread of a front given per-objective best/worst reference values.

    For each objective the front is sorted along that objective; the gaps
    between neighbours, plus the gaps to ``lower`` and ``upper``, enter
    (d_0 + d_N + sum |d_i - mean|) / (d_0 + d_N + (N - 1) mean). The max over
    objectives is returned. A single point gives 1.
    """
    F = np.atleast_2d(np.asarray(values, dtype=float))
    N, m = F.shape
    if N == 0:
        raise InvalidArgument("empty front")
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    out = 0.0
    for j in range(m):
        v = np.sort(F[:, j])
        d0 = v[0] - lower[j]
        dN = upper[j] - v[-1]
        if N == 1:
            num = den = d0 + dN
        else:
            gaps = np.diff(v)
            mean = gaps.mean()
            num = d0 + dN + np.abs(gaps - mean).sum()
            den = d0 + dN + (N - 1) * mean
        if den == 0:
            val = 1.0 if N == 1 else 0.0
        else:
            val = num / den
        out = max(out, float(val))
    return out


def reference_box(fronts, margin: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """(ideal, reference) for the hypervolume: union min, union max plus a 10% margin.

    Objectives with zero range get a margin of 0.1 * (1 + |max|) instead.
    """
    lo, hi = extremes(fronts)
    span = hi - lo
    pad = np.where(span > 0, margin * span, margin * (1.0 + np.abs(hi)))
    return lo, hi + pad


def hypervolume_mc(values, ref_point, ideal_point, n_samples: int = 10_000, seed: int = 0) -> float:
    """Fraction of uniform samples in [ideal, ref] dominated by some front point."""
    F = np.atleast_2d(np.asarray(values, dtype=float))
    ref = np.asarray(ref_point, dtype=float)
    ideal = np.asarray(ideal_point, dtype=float)
    if np.any(ref - ideal <= 0):
        raise InvalidArgument("degenerate hypervolume box")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    S = rng.uniform(ideal, ref, size=(n_samples, ref.shape[0]))
    dominated = np.zeros(n_samples, dtype=bool)
    for f in F:
        dominated |= np.all(f <= S, axis=1)
    return float(dominated.sum()) / n_samples


@dataclass
class ProfileCurve:
    """Right-continuous step function rho(tau) stored as (breakpoints, values)."""

    solver: str
    taus: np.ndarray
    values: np.ndarray

    def __call__(self, tau: float) -> float:
        k = np.searchsorted(self.taus, tau, side="right")
        return 0.0 if k == 0 else float(self.values[k - 1])


def performance_ratios(matrix, invert: bool = False) -> np.ndarray:
    """r_ps = m_ps / min_s m_ps with failures (nan/inf) as +inf.

    ``invert`` uses 1/m (for hypervolume, where larger is better). A zero
    best value gives ratio 1 to the solvers attaining it and inf otherwise.
    """
    M = np.array(matrix, dtype=float)
    if M.ndim != 2:
        raise InvalidArgument("metric matrix must be problems x solvers")
    if invert:
        with np.errstate(divide="ignore"):
            M = np.where(M > 0, 1.0 / M, np.inf)
    M[~np.isfinite(M)] = np.inf
    if np.any(M < 0):
        raise InvalidArgument("metric values must be >= 0")
    best = M.min(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        R = M / best
    R = np.where(M == best, 1.0, R)
    R[np.isinf(M)] = np.inf
    return R


def performance_profile(matrix, solvers=None, invert: bool = False) -> list[ProfileCurve]:
    R = performance_ratios(matrix, invert)
    P, S = R.shape
    solvers = list(solvers) if solvers is not None else [f"s{k}" for k in range(S)]
    curves = []
    for s in range(S):
        finite = np.sort(R[np.isfinite(R[:, s]), s])
        taus = np.unique(finite)
        counts = np.searchsorted(finite, taus, side="right")
        curves.append(ProfileCurve(solvers[s], taus, counts / P))
    return curves


def profile_csv(curves, header: str = "") -> str:
    taus = sorted(set(np.concatenate([c.taus for c in curves] + [np.array([1.0])]).tolist()))
    buf = io.StringIO()
    if header:
        buf.write(header)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau"] + [f"rho_{c.solver}" for c in curves])
    for tau in taus:
        w.writerow([repr(float(tau))] + [repr(c(tau)) for c in curves])
    return buf.getvalue()


def eval_accounting(counter: EvalCounter, n: int, method: str) -> int:
    """Function evaluations when derivatives come from forward differences.

    MONPG and WS pay n per gradient and n(n+1)/2 per Hessian each iteration;
    MOPG pays only the gradient.
    """
    method = method.upper()
    if method in ("MONPG", "WS"):
        return counter.n_f + n * counter.n_it + n * (n + 1) // 2 * counter.n_it
    if method == "MOPG":
        return counter.n_f + n * counter.n_it
    raise InvalidArgument(f"unknown method {method!r}")
