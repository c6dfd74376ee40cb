"""Test problems: the two-objective problem P1, the nonsmooth families gA-gH, synthetic
strongly convex quadratics, and a name -> constructor registry.

Random data (gG vectors, synthetic quadratics) comes from numpy's Philox4x64
counter-based bit generator keyed by the seed, drawn in a fixed documented
order, so equal seeds give bit-identical problems on every platform.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .problem import (ConvexPiece, InvalidArgument, MultiObjectiveProblem, PiecewiseMaxFunction,
                      SmoothFunction)

Q = ConvexPiece.quadratic
A = ConvexPiece.affine
PS = ConvexPiece.power_sum


def philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def _pmax(*pieces) -> PiecewiseMaxFunction:
    return PiecewiseMaxFunction(tuple(pieces))


def _sq(center, weights=None) -> ConvexPiece:
    """sum_i w_i (x_i - center_i)^2 as a quadratic piece."""
    center = np.asarray(center, dtype=float)
    w = np.ones_like(center) if weights is None else np.asarray(weights, dtype=float)
    return Q(np.diag(2 * w), -2 * w * center, float(np.sum(w * center**2)))


def make_gA() -> list[PiecewiseMaxFunction]:
    g1 = _pmax(_sq([2, -2]), Q(np.diag([2.0, 0.0]), [0, 8]))
    g2 = _pmax(A([5, 1]), _sq([0, 0]))
    return [g1, g2]


def make_gB() -> list[PiecewiseMaxFunction]:
    # Second piece of gB_1 read as (x_1 + 1)^2; second component is gB_2.
    g1 = _pmax(_sq([0, 1]), _sq([-1, 0], [1, 0]))
    g2 = _pmax(PS([1, 1], [0, 0], [4, 2]), A([2, 2]))
    return [g1, g2]


def make_gC() -> list[PiecewiseMaxFunction]:
    g1 = _pmax(Q(2 * np.eye(3), c=-1.0), _sq([0, 0, 2]))
    g2 = _pmax(A([1, 1, 1], -1), A([1, 1, -1], 1))
    # 2x1^2 + 6x2^2 + 2(5x3 - x1)^2
    v = np.array([-1.0, 0.0, 5.0])
    g3 = _pmax(Q(np.diag([4.0, 12.0, 0.0]) + 4 * np.outer(v, v)), Q(np.diag([2.0, 0, 0]), [0, 0, -9]))
    return [g1, g2, g3]


def _cb2_like(first: ConvexPiece) -> PiecewiseMaxFunction:
    return _pmax(first, _sq([2, 2]), ConvexPiece.exp_affine(2.0, [-1, 1]))


def _dem() -> PiecewiseMaxFunction:
    # x1^2 + x2^2 + 4x2 (unbalanced parenthesis in the printed formula dropped)
    return _pmax(A([5, 1]), A([-5, 1]), Q(2 * np.eye(2), [0, 4]))


def make_gD() -> list[PiecewiseMaxFunction]:
    return [_cb2_like(PS([1, 1], [0, 0], [2, 4])), _cb2_like(PS([1, 1], [0, 0], [4, 2])), _dem()]


def make_gE() -> list[PiecewiseMaxFunction]:
    I2 = 2 * np.eye(2)
    g1 = _pmax(Q(I2), Q(I2, [-40, -10], 40), Q(I2, [-10, -20], 60))
    return [g1, _cb2_like(PS([1, 1], [0, 0], [2, 4])), _dem()]


def make_gF() -> list[PiecewiseMaxFunction]:
    H11 = np.diag([2.0, 2.0, 4.0, 2.0])
    b11 = np.array([-5.0, -5.0, -21.0, 7.0])

    def plus(diag, lin, const):
        return Q(H11 + 20 * np.diag(diag), b11 + 10 * np.asarray(lin, float), 10 * const)

    g11 = Q(H11, b11)
    g12 = plus([1, 1, 1, 1], [1, -1, 1, -1], -8)
    g21 = plus([1, 2, 1, 2], [-1, 0, 0, -1], -10)
    g22 = plus([2, 1, 1, 0], [2, -1, 0, -1], -5)
    return [_pmax(g11, g12), _pmax(g21, g22)]


def make_gH() -> list[PiecewiseMaxFunction]:
    absx = _pmax(A([1.0]), A([-1.0]))
    return [absx, absx]


def make_gG(n: int, m: int, seed: int) -> list[PiecewiseMaxFunction]:
    """g_j = max(u_j1'x, u_j2'x), u ~ U[0, 0.1]^n.

    Draw order: for j = 1..m, u_j1 then u_j2, each ``rng.uniform(0, 0.1, n)``
    from Philox(seed).
    """
    if n < 1 or m < 1:
        raise InvalidArgument("need n >= 1 and m >= 1")
    rng = philox(seed)
    out = []
    for _ in range(m):
        u1 = rng.uniform(0.0, 0.1, n)
        u2 = rng.uniform(0.0, 0.1, n)
        out.append(_pmax(A(u1), A(u2)))
    return out


def p1_smooth() -> list[SmoothFunction]:
    return [SmoothFunction.power_sum([1, 1], [0, 0], [4, 4]),
            SmoothFunction.power_sum([1, 1], [5, 5], [4, 4])]


def make_p1() -> MultiObjectiveProblem:
    return MultiObjectiveProblem("P1", p1_smooth(), make_gA(), [-3, -3], [7, 7])


def make_p1_gB() -> MultiObjectiveProblem:
    return MultiObjectiveProblem("P1_gB", p1_smooth(), make_gB(), [-3, -3], [7, 7])


def quadratic_problem(name, matrices, centers, nonsmooth=None, lb=None, ub=None,
                      sigma=None) -> MultiObjectiveProblem:
    """f_j(x) = 0.5 (x - c_j)' A_j (x - c_j) with the given nonsmooth parts (default 0)."""
    fs = []
    for Aj, cj in zip(matrices, centers):
        Aj = np.asarray(Aj, dtype=float)
        cj = np.asarray(cj, dtype=float)
        fs.append(SmoothFunction.quadratic(Aj, -Aj @ cj, 0.5 * cj @ Aj @ cj, sigma=sigma))
    n = fs[0].n
    if nonsmooth is None:
        nonsmooth = [PiecewiseMaxFunction.zero(n) for _ in fs]
    lb = -5 * np.ones(n) if lb is None else lb
    ub = 5 * np.ones(n) if ub is None else ub
    return MultiObjectiveProblem(name, fs, nonsmooth, lb, ub)


def make_synthetic_quadratic(n: int, m: int, sigma: float = 1.0, seed: int = 0,
                             nonsmooth: str | list | None = None, name: str | None = None,
                             box: float = 5.0) -> MultiObjectiveProblem:
    """Random quadratics with lambda_min(A_j) = sigma exactly.

    A_j = sigma I + R_j'R_j with R_j of shape (n-1, n) (rank deficient, so the
    smallest eigenvalue is sigma); centers c_j ~ U[-2, 2]^n. Draw order per j:
    R_j (standard normal, scaled by 1/sqrt(n)) then c_j. ``nonsmooth`` may be
    None (g = 0), "gG" (seeded with ``seed + 1``) or an explicit list.
    """
    if sigma <= 0:
        raise InvalidArgument("sigma must be > 0")
    rng = philox(seed)
    mats, centers = [], []
    for _ in range(m):
        R = rng.standard_normal((n - 1, n)) / np.sqrt(n)
        mats.append(sigma * np.eye(n) + R.T @ R)
        centers.append(rng.uniform(-2.0, 2.0, n))
    if nonsmooth == "gG":
        nonsmooth = make_gG(n, m, seed + 1)
    name = name or f"SQ_n{n}_m{m}_s{seed}"
    return quadratic_problem(name, mats, centers, nonsmooth, -box * np.ones(n), box * np.ones(n), sigma=sigma)


def make_gH_quadratic() -> MultiObjectiveProblem:
    return quadratic_problem("H1", [[[1.0]], [[1.0]]], [[1.0], [-1.0]], make_gH(), [-5.0], [5.0])


_REGISTRY: dict[str, Callable[[], MultiObjectiveProblem]] = {}

SYNTHETIC_GG = [(2, 1, 11), (3, 1, 12), (2, 2, 13), (3, 2, 14), (5, 2, 15),
                (2, 3, 16), (3, 3, 17), (5, 3, 18), (4, 2, 19), (4, 3, 20)]


def register(name: str, ctor: Callable[[], MultiObjectiveProblem]) -> None:
    """Add a problem constructor, e.g. for smooth parts from other sources."""
    if name in _REGISTRY:
        raise InvalidArgument(f"problem {name!r} already registered")
    _REGISTRY[name] = ctor


def _builtin():
    register("P1", make_p1)
    register("P1_gB", make_p1_gB)
    register("H1", make_gH_quadratic)
    for n, m, seed in SYNTHETIC_GG:
        nm = f"SQ_n{n}_m{m}_gG{seed}"
        register(nm, lambda n=n, m=m, seed=seed, nm=nm: make_synthetic_quadratic(n, m, 1.0, seed, "gG", nm))
    for k in range(5):
        nm = f"SQ_n2_m2_s{k}"
        register(nm, lambda k=k, nm=nm: make_synthetic_quadratic(2, 2, 1.0, 100 + k, None, nm))
    register("SQ_gC", lambda: make_synthetic_quadratic(3, 3, 1.0, 31, make_gC(), "SQ_gC", box=2.0))
    register("SQ_gD", lambda: make_synthetic_quadratic(2, 3, 1.0, 32, make_gD(), "SQ_gD", box=2.0))
    register("SQ_gE", lambda: make_synthetic_quadratic(2, 3, 1.0, 33, make_gE(), "SQ_gE", box=2.0))
    register("SQ_gF", lambda: make_synthetic_quadratic(4, 2, 1.0, 34, make_gF(), "SQ_gF", box=2.0))


_builtin()


class UnknownProblem(KeyError):
    pass


def get_problem(name: str) -> MultiObjectiveProblem:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise UnknownProblem(name) from None


def problem_names() -> list[str]:
    return list(_REGISTRY)


def in_scope_comparison_set() -> list[str]:
    """P1, P1 with gB, the gH problem and the ten gG-perturbed quadratics."""
    return ["P1", "P1_gB", "H1"] + [f"SQ_n{n}_m{m}_gG{s}" for n, m, s in SYNTHETIC_GG]
