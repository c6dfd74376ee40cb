"""MONPG (Newton-type proximal gradient), the MOPG baseline and weighted sum.

All three share one loop: solve a direction subproblem at x^k, stop when
||d^k|| < eps, otherwise take the first step in {1, r, r^2, ...} that
decreases every objective by at least beta * alpha * t^k, and repeat.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .problem import (ConvexPiece, EvalCounter, InvalidArgument, MultiObjectiveProblem,
                      PiecewiseMaxFunction, SmoothFunction, _as_vector, eval_objectives)
from .subproblem import (DEFAULT_TOL, SubproblemError, build_model, build_prox_model, solve)

TERMINATIONS = ("critical", "max_iter", "line_search_stall", "subproblem_failure")
MAX_WS_PIECES = 10_000


class LineSearchStall(RuntimeError):
    pass


class UnsupportedProblem(InvalidArgument):
    pass


@dataclass(frozen=True)
class SolverConfig:
    beta: float = 0.1
    r: float = 0.5
    eps: float = 1e-5
    max_iter: int = 200
    subproblem_tol: float = DEFAULT_TOL
    max_backtracks: int = 60
    derivatives: str = "analytic"
    # MOPG proximal parameter; None means L if declared, else adaptive doubling.
    ell: float | None = None

    def __post_init__(self):
        if not 0 < self.beta < 1 or not 0 < self.r < 1:
            raise InvalidArgument("beta and r must lie in (0, 1)")
        if self.eps <= 0 or self.subproblem_tol <= 0:
            raise InvalidArgument("eps and subproblem_tol must be > 0")
        if self.max_iter < 1 or self.max_backtracks < 1:
            raise InvalidArgument("max_iter and max_backtracks must be positive")
        if self.derivatives not in ("analytic", "forward-difference"):
            raise InvalidArgument(f"unknown derivative mode {self.derivatives!r}")
        if self.ell is not None and self.ell <= 0:
            raise InvalidArgument("ell must be > 0")

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidArgument(f"unknown solver options {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class IterationRecord:
    x: np.ndarray
    F: np.ndarray
    d: np.ndarray
    t: float
    alpha: float | None = None
    mu: float = 0.0
    ell: float | None = None

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "F": self.F.tolist(), "d": self.d.tolist(), "t": self.t,
                "alpha": self.alpha, "mu": self.mu, "ell": self.ell}


@dataclass
class RunResult:
    problem: str
    solver: str
    x0: np.ndarray
    x: np.ndarray
    F: np.ndarray
    termination: str
    trajectory: list = field(default_factory=list)
    counter: EvalCounter = field(default_factory=EvalCounter)
    wall_time: float = 0.0
    d_norm: float = float("nan")
    message: str = ""
    start_id: int = 0
    weights: np.ndarray | None = None

    @property
    def iterations(self) -> int:
        return self.counter.n_it

    @property
    def success(self) -> bool:
        return self.termination in ("critical", "max_iter")

    def to_dict(self, trajectory: bool = True) -> dict:
        out = {
            "problem": self.problem, "solver": self.solver, "start_id": self.start_id,
            "termination": self.termination, "message": self.message,
            "x0": self.x0.tolist(), "x": self.x.tolist(), "F": self.F.tolist(),
            "d_norm": self.d_norm, "counters": self.counter.to_dict(), "wall_time": self.wall_time,
            "weights": None if self.weights is None else self.weights.tolist(),
        }
        if trajectory:
            out["trajectory"] = [rec.to_dict() for rec in self.trajectory]
        return out

    def to_json(self, trajectory: bool = True, **kw) -> str:
        return json.dumps(self.to_dict(trajectory), **kw)

    def csv_row(self) -> list[str]:
        return ([self.problem, self.solver, str(self.start_id), str(self.iterations), str(self.counter.n_f),
                 repr(float(self.d_norm))] + [repr(float(v)) for v in self.F])

    @staticmethod
    def csv_header(m: int) -> list[str]:
        return ["problem", "solver", "start_id", "iterations", "n_f", "d_norm"] + [f"F{j + 1}" for j in range(m)]


def armijo_search(problem: MultiObjectiveProblem, x, d, t: float, config: SolverConfig = SolverConfig(),
                  Fx=None, counter: EvalCounter | None = None) -> float:
    """First alpha in {1, r, r^2, ...} with F_j(x + alpha d) <= F_j(x) + beta alpha t for all j."""
    x = _as_vector(x, problem.n)
    d = _as_vector(d, problem.n)
    if not t < 0:
        raise InvalidArgument("Armijo search needs t < 0")
    Fx = eval_objectives(problem, x, counter) if Fx is None else np.asarray(Fx)
    alpha = 1.0
    for _ in range(config.max_backtracks):
        if np.all(eval_objectives(problem, x + alpha * d, counter) <= Fx + config.beta * alpha * t):
            return alpha
        alpha *= config.r
    raise LineSearchStall(f"no Armijo step after {config.max_backtracks} backtracks")


def _newton_direction(problem, x, config, counter, state):
    model = build_model(problem, x, None, config.derivatives, counter)
    return solve(model, config.subproblem_tol), {"mu": model.mu}


def _prox_direction(problem, x, config, counter, state):
    fixed = state["ell"]
    # Doubling from max(1, ell_prev / 2) lands on the same powers of two as a
    # restart from 1 unless the curvature halved since the last iteration.
    ell = fixed if fixed is not None else max(1.0, 0.5 * state.get("ell_prev", 1.0))
    base = build_prox_model(problem, x, ell, config.derivatives, counter)
    eye = np.eye(problem.n)
    for _ in range(60):
        model = dataclasses.replace(base, hessians=np.broadcast_to(ell * eye, base.hessians.shape).copy())
        sol = solve(model, config.subproblem_tol)
        if fixed is not None or np.linalg.norm(sol.d) < config.eps:
            break
        # Proximal decrease: F_j(x + d) <= F_j(x) + Q^PG_j(x, d) for every j.
        if np.all(eval_objectives(problem, x + sol.d, counter) <= state["Fx"] + model.Q(sol.d)):
            break
        ell *= 2.0
    state["ell_prev"] = ell
    return sol, {"ell": ell}


def _descent(problem: MultiObjectiveProblem, x0, config: SolverConfig, name: str, direction,
             state: dict | None = None) -> RunResult:
    start = time.perf_counter()
    x = _as_vector(x0, problem.n).copy()
    counter = EvalCounter()
    state = state or {}
    Fx = eval_objectives(problem, x, counter)
    result = RunResult(problem.name, name, x.copy(), x, Fx, "max_iter", counter=counter)
    while True:
        state["Fx"] = Fx
        try:
            sol, info = direction(problem, x, config, counter, state)
            tight = config
            for _ in range(2):
                # t(x) < 0 whenever d(x) != 0; a nonnegative t with a long d means
                # the sign of t is below the subproblem accuracy, so tighten it.
                if sol.t < 0 or np.linalg.norm(sol.d) < config.eps:
                    break
                tight = dataclasses.replace(tight, subproblem_tol=tight.subproblem_tol * 1e-3)
                sol, info = direction(problem, x, tight, counter, state)
        except SubproblemError as exc:
            result.termination, result.message = "subproblem_failure", str(exc)
            break
        rec = IterationRecord(x.copy(), Fx.copy(), sol.d.copy(), sol.t, None,
                              info.get("mu", 0.0), info.get("ell"))
        result.trajectory.append(rec)
        result.d_norm = float(np.linalg.norm(sol.d))
        if result.d_norm < config.eps:
            result.termination = "critical"
            break
        if counter.n_it >= config.max_iter:
            result.termination = "max_iter"
            break
        try:
            alpha = armijo_search(problem, x, sol.d, sol.t, config, Fx, counter)
        except (LineSearchStall, InvalidArgument) as exc:
            result.termination, result.message = "line_search_stall", str(exc)
            break
        rec.alpha = alpha
        x = x + alpha * sol.d
        Fx = eval_objectives(problem, x, counter)
        counter.n_it += 1
    result.x, result.F = x, Fx
    result.wall_time = time.perf_counter() - start
    return result


def monpg_run(problem: MultiObjectiveProblem, x0, config: SolverConfig = SolverConfig()) -> RunResult:
    """Newton-type proximal gradient method from ``x0``."""
    return _descent(problem, x0, config, "monpg", _newton_direction)


def mopg_run(problem: MultiObjectiveProblem, x0, config: SolverConfig = SolverConfig(),
             ell: float | None = None) -> RunResult:
    """Proximal gradient baseline: linearized f_j plus (ell/2)||d||^2.

    ``ell`` defaults to config.ell, then to the declared L; without either it
    doubles, starting from max(1, previous ell / 2), until the proximal
    decrease holds.
    """
    ell = ell if ell is not None else config.ell if config.ell is not None else problem.L
    if ell is not None and ell <= 0:
        raise InvalidArgument("ell must be > 0")
    return _descent(problem, x0, config, "mopg", _prox_direction, {"ell": ell})


class _SumOfPieces:
    def __init__(self, weights, pieces):
        self.weights = weights
        self.pieces = pieces

    def value(self, x):
        return sum(w * p.value(x) for w, p in zip(self.weights, self.pieces))

    def gradient(self, x):
        return sum(w * p.gradient(x) for w, p in zip(self.weights, self.pieces))

    def hessian(self, x):
        return sum(w * p.hessian(x) for w, p in zip(self.weights, self.pieces))


def _combine_pieces(weights, pieces) -> ConvexPiece:
    if all(p.kind in ("affine", "quadratic") for p in pieces):
        n = pieces[0].n
        A = np.zeros((n, n))
        b = np.zeros(n)
        c = 0.0
        for w, p in zip(weights, pieces):
            if p.kind == "affine":
                b += w * p.u
            else:
                A += w * p.A
                b += w * p.b
            c += w * p.c
        if not A.any():
            return ConvexPiece.affine(b, c)
        return ConvexPiece.quadratic(A, b, c)
    return ConvexPiece.generic(_SumOfPieces(list(weights), list(pieces)), pieces[0].n)


def scalarize(problem: MultiObjectiveProblem, w) -> MultiObjectiveProblem:
    """Single-objective problem sum_j w_j (f_j + g_j).

    sum_j w_j g_j is rewritten as one max over the product of piece indices,
    skipping objectives with zero weight.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (problem.m,) or np.any(w < 0) or abs(w.sum() - 1) > 1e-9:
        raise InvalidArgument("weights must lie on the simplex")
    used = [j for j in range(problem.m) if w[j] > 0]
    count = int(np.prod([len(problem.nonsmooth[j].pieces) for j in used]))
    if count > MAX_WS_PIECES:
        raise UnsupportedProblem(f"weighted sum needs {count} pieces (cap {MAX_WS_PIECES})")
    ww = [w[j] for j in used]
    pieces = tuple(_combine_pieces(ww, combo)
                   for combo in itertools.product(*(problem.nonsmooth[j].pieces for j in used)))
    f = SmoothFunction.weighted_sum(ww, [problem.smooth[j] for j in used])
    return MultiObjectiveProblem(f"{problem.name}[ws]", [f], [PiecewiseMaxFunction(pieces)],
                                 problem.lb, problem.ub)


def weighted_sum_run(problem: MultiObjectiveProblem, w, x0, config: SolverConfig = SolverConfig()) -> RunResult:
    """MONPG on the weighted-sum scalarization; ``F`` of the result is the original objective vector."""
    scalar = scalarize(problem, w)
    res = monpg_run(scalar, x0, config)
    res.problem = problem.name
    res.solver = "ws"
    res.weights = np.asarray(w, dtype=float)
    res.F = eval_objectives(problem, res.x)
    return res


def weight_grid(m: int, count: int = 100) -> np.ndarray:
    """Deterministic weights on the simplex, unit vectors included.

    m = 2: w_1 = i / (count - 1). m >= 3: the simplex lattice with step 1/H,
    H chosen so the number of non-vertex lattice points is closest to
    count - m (ties go to the larger lattice).
    """
    if m < 1 or count < 1:
        raise InvalidArgument("need m >= 1 and count >= 1")
    if m == 1:
        return np.ones((1, 1))
    if m == 2:
        if count < 2:
            raise InvalidArgument("need at least the two unit weights")
        w1 = np.linspace(1.0, 0.0, count)
        return np.column_stack([w1, 1.0 - w1])
    from math import comb

    target = max(count - m, 0)
    best_H = min(range(1, 200), key=lambda H: (abs(comb(H + m - 1, m - 1) - m - target), -H))
    pts = [np.array(c) / best_H for c in _compositions(best_H, m)]
    return np.array(sorted(pts, key=lambda p: tuple(-p)))


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


SOLVERS = {"monpg": monpg_run, "mopg": mopg_run}
