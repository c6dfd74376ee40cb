"""Composite multi-objective problems F_j = f_j + g_j.

Smooth parts are ``SmoothFunction`` objects with analytic gradient and
Hessian. Nonsmooth parts are ``PiecewiseMaxFunction`` objects, i.e. the
pointwise maximum of a few smooth convex pieces, which gives cheap access to
the active set and to subgradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


class InvalidArgument(ValueError):
    """Raised on dimension mismatches and malformed problem data."""


def _as_vector(x, n: int | None = None) -> Array:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1:
        raise InvalidArgument(f"expected a vector, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise InvalidArgument(f"expected dimension {n}, got {x.shape[0]}")
    return x


class PowerSum:
    """Separable function sum_i coef_i * (x_i - shift_i) ** power_i.

    Convex when every term is: power 1 with any coefficient, or an even power
    with a nonnegative coefficient. Picklable, unlike a lambda.
    """

    def __init__(self, coef, shift, power):
        self.coef = np.asarray(coef, dtype=float)
        self.shift = np.asarray(shift, dtype=float)
        self.power = np.asarray(power, dtype=int)
        if not (self.coef.shape == self.shift.shape == self.power.shape) or self.coef.ndim != 1:
            raise InvalidArgument("coef, shift and power must be vectors of equal length")
        for a, p in zip(self.coef, self.power):
            if p < 1 or (p != 1 and (p % 2 or a < 0)):
                raise InvalidArgument(f"term {a}*(x-s)^{p} is not convex")

    @property
    def n(self) -> int:
        return self.coef.shape[0]

    def value(self, x: Array) -> float:
        return float(np.sum(self.coef * (x - self.shift) ** self.power))

    def gradient(self, x: Array) -> Array:
        p = self.power
        return self.coef * p * (x - self.shift) ** np.maximum(p - 1, 0)

    def hessian(self, x: Array) -> Array:
        p = self.power
        diag = np.where(p >= 2, self.coef * p * (p - 1) * (x - self.shift) ** np.maximum(p - 2, 0), 0.0)
        return np.diag(diag)


class _Quadratic:
    def __init__(self, A, b, c):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.c = float(c)

    def value(self, x):
        return float(0.5 * x @ self.A @ x + self.b @ x + self.c)

    def gradient(self, x):
        return self.A @ x + self.b

    def hessian(self, x):
        return self.A


class _Zero:
    def __init__(self, n):
        self.n = n

    def value(self, x):
        return 0.0

    def gradient(self, x):
        return np.zeros(self.n)

    def hessian(self, x):
        return np.zeros((self.n, self.n))


class _WeightedSum:
    def __init__(self, weights, parts):
        self.weights = [float(w) for w in weights]
        self.parts = list(parts)

    def value(self, x):
        return float(sum(w * p.value(x) for w, p in zip(self.weights, self.parts)))

    def gradient(self, x):
        return sum(w * p.gradient(x) for w, p in zip(self.weights, self.parts))

    def hessian(self, x):
        return sum(w * p.hessian(x) for w, p in zip(self.weights, self.parts))


@dataclass(frozen=True)
class SmoothFunction:
    """Convex C^2 function with analytic derivatives.

    ``sigma`` is a declared strong-convexity modulus (0 means merely convex)
    and ``L`` an optional Lipschitz constant of the gradient.
    """

    n: int
    value: Callable[[Array], float]
    gradient: Callable[[Array], Array]
    hessian: Callable[[Array], Array]
    sigma: float = 0.0
    L: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise InvalidArgument("dimension must be positive")
        if self.sigma < 0:
            raise InvalidArgument("sigma must be >= 0")
        if self.L is not None and self.L <= 0:
            raise InvalidArgument("L must be > 0")

    @classmethod
    def from_object(cls, obj, n: int, sigma: float = 0.0, L: float | None = None) -> "SmoothFunction":
        return cls(n, obj.value, obj.gradient, obj.hessian, sigma, L)

    @classmethod
    def quadratic(cls, A, b=None, c=0.0, sigma=None, L=None) -> "SmoothFunction":
        """``0.5 x'Ax + b'x + c``; sigma and L default to the extreme eigenvalues of A."""
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        b = np.zeros(n) if b is None else b
        eig = np.linalg.eigvalsh(A)
        if sigma is None:
            sigma = max(float(eig[0]), 0.0)
        if L is None and eig[-1] > 0:
            L = float(eig[-1])
        return cls.from_object(_Quadratic(A, b, c), n, sigma, L)

    @classmethod
    def power_sum(cls, coef, shift, power, sigma=0.0, L=None) -> "SmoothFunction":
        ps = PowerSum(coef, shift, power)
        return cls.from_object(ps, ps.n, sigma, L)

    @classmethod
    def zero(cls, n: int) -> "SmoothFunction":
        return cls.from_object(_Zero(n), n)

    @classmethod
    def weighted_sum(cls, weights, funcs: Sequence["SmoothFunction"]) -> "SmoothFunction":
        n = funcs[0].n
        sigma = float(sum(w * f.sigma for w, f in zip(weights, funcs)))
        Ls = [f.L for w, f in zip(weights, funcs) if w > 0]
        L = float(sum(w * f.L for w, f in zip(weights, funcs) if w > 0)) if all(l is not None for l in Ls) else None
        return cls.from_object(_WeightedSum(weights, funcs), n, sigma, L or None)


PIECE_KINDS = ("affine", "quadratic", "exp_affine", "generic")


@dataclass(frozen=True)
class ConvexPiece:
    """One smooth convex piece of a pointwise maximum.

    Kinds and values:
      affine      u'x + c
      quadratic   0.5 x'Ax + b'x + c   (A positive semidefinite)
      exp_affine  s * exp(u'x + c)     (s > 0)
      generic     user callbacks, declared convex
    """

    kind: str
    n: int
    u: Array | None = None
    A: Array | None = None
    b: Array | None = None
    c: float = 0.0
    scale: float = 1.0
    callbacks: object | None = None
    declared_convex: bool = True
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in PIECE_KINDS:
            raise InvalidArgument(f"unknown piece kind {self.kind!r}")
        if self.kind == "quadratic" and np.linalg.eigvalsh(self.A)[0] < -1e-10:
            raise InvalidArgument("quadratic piece must have a PSD matrix")
        if self.kind == "exp_affine" and self.scale <= 0:
            raise InvalidArgument("exp_affine scale must be > 0")
        if self.kind == "generic" and not self.declared_convex:
            raise InvalidArgument("generic pieces must be declared convex")

    @classmethod
    def affine(cls, u, c=0.0) -> "ConvexPiece":
        u = np.asarray(u, dtype=float)
        return cls("affine", u.shape[0], u=u, c=float(c))

    @classmethod
    def quadratic(cls, A, b=None, c=0.0) -> "ConvexPiece":
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
        return cls("quadratic", n, A=0.5 * (A + A.T), b=b, c=float(c))

    @classmethod
    def exp_affine(cls, scale, u, c=0.0) -> "ConvexPiece":
        u = np.asarray(u, dtype=float)
        return cls("exp_affine", u.shape[0], u=u, c=float(c), scale=float(scale))

    @classmethod
    def generic(cls, obj, n: int, params: dict | None = None) -> "ConvexPiece":
        """Wrap any object exposing value/gradient/hessian."""
        return cls("generic", n, callbacks=obj, params=params or {})

    @classmethod
    def power_sum(cls, coef, shift, power) -> "ConvexPiece":
        ps = PowerSum(coef, shift, power)
        params = {"coef": ps.coef.tolist(), "shift": ps.shift.tolist(), "power": ps.power.tolist()}
        return cls.generic(ps, ps.n, params)

    def value(self, x: Array) -> float:
        k = self.kind
        if k == "affine":
            return float(self.u @ x + self.c)
        if k == "quadratic":
            return float(0.5 * x @ self.A @ x + self.b @ x + self.c)
        if k == "exp_affine":
            return float(self.scale * np.exp(self.u @ x + self.c))
        return float(self.callbacks.value(x))

    def gradient(self, x: Array) -> Array:
        k = self.kind
        if k == "affine":
            return self.u.copy()
        if k == "quadratic":
            return self.A @ x + self.b
        if k == "exp_affine":
            return self.scale * np.exp(self.u @ x + self.c) * self.u
        return np.asarray(self.callbacks.gradient(x), dtype=float)

    def hessian(self, x: Array) -> Array:
        k = self.kind
        if k == "affine":
            return np.zeros((self.n, self.n))
        if k == "quadratic":
            return self.A
        if k == "exp_affine":
            return self.scale * np.exp(self.u @ x + self.c) * np.outer(self.u, self.u)
        return np.asarray(self.callbacks.hessian(x), dtype=float)

    def to_dict(self) -> dict:
        if self.kind == "affine":
            return {"kind": "affine", "u": self.u.tolist(), "c": self.c}
        if self.kind == "quadratic":
            return {"kind": "quadratic", "A": self.A.tolist(), "b": self.b.tolist(), "c": self.c}
        if self.kind == "exp_affine":
            return {"kind": "exp_affine", "scale": self.scale, "u": self.u.tolist(), "c": self.c}
        if "power" in self.params:
            return {"kind": "power_sum", **self.params}
        raise InvalidArgument("generic piece without serializable parameters")


def default_active_tol(gx: float) -> float:
    return 1e-9 * (1.0 + abs(gx))


@dataclass(frozen=True)
class PiecewiseMaxFunction:
    """g(x) = max_k piece_k(x), evaluated exactly (no smoothing)."""

    pieces: tuple[ConvexPiece, ...]

    def __post_init__(self):
        if len(self.pieces) < 1:
            raise InvalidArgument("need at least one piece")
        object.__setattr__(self, "pieces", tuple(self.pieces))
        if len({p.n for p in self.pieces}) != 1:
            raise InvalidArgument("pieces have different dimensions")

    @property
    def n(self) -> int:
        return self.pieces[0].n

    @classmethod
    def zero(cls, n: int) -> "PiecewiseMaxFunction":
        return cls((ConvexPiece.affine(np.zeros(n)),))

    def piece_values(self, x: Array) -> Array:
        return np.array([p.value(x) for p in self.pieces])

    def value(self, x: Array) -> float:
        return float(np.max(self.piece_values(x)))

    def subgradient(self, x, active_tol: float | None = None) -> tuple[list[int], Array]:
        return subgradient_g(self, x, active_tol)


def subgradient_g(g: PiecewiseMaxFunction, x, active_tol: float | None = None) -> tuple[list[int], Array]:
    """Active pieces at ``x`` and the gradient of the lowest-indexed one.

    A piece is active when its value is within ``active_tol`` of the max;
    the default tolerance is ``1e-9 * (1 + |g(x)|)``.
    """
    x = _as_vector(x, g.n)
    vals = g.piece_values(x)
    gx = float(vals.max())
    tol = default_active_tol(gx) if active_tol is None else active_tol
    if tol < 0:
        raise InvalidArgument("active_tol must be >= 0")
    active = [k for k, v in enumerate(vals) if v >= gx - tol]
    return active, g.pieces[active[0]].gradient(x)


@dataclass
class EvalCounter:
    """Per-run evaluation counts. Never share one between concurrent runs."""

    n_f: int = 0
    n_grad: int = 0
    n_hess: int = 0
    n_it: int = 0

    def to_dict(self) -> dict:
        return {"n_f": self.n_f, "n_grad": self.n_grad, "n_hess": self.n_hess, "n_it": self.n_it}


@dataclass(frozen=True)
class MultiObjectiveProblem:
    """m composite objectives over R^n plus a box used only to draw starts."""

    name: str
    smooth: tuple[SmoothFunction, ...]
    nonsmooth: tuple[PiecewiseMaxFunction, ...]
    lb: Array
    ub: Array

    def __post_init__(self):
        object.__setattr__(self, "smooth", tuple(self.smooth))
        object.__setattr__(self, "nonsmooth", tuple(self.nonsmooth))
        lb = np.array(self.lb, dtype=float).reshape(-1)
        ub = np.array(self.ub, dtype=float).reshape(-1)
        lb.setflags(write=False)
        ub.setflags(write=False)
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)
        if len(self.smooth) != len(self.nonsmooth) or not self.smooth:
            raise InvalidArgument("need the same positive number of smooth and nonsmooth parts")
        n = self.smooth[0].n
        if any(f.n != n for f in self.smooth) or any(g.n != n for g in self.nonsmooth):
            raise InvalidArgument("all parts must share the dimension n")
        if lb.shape != (n,) or ub.shape != (n,):
            raise InvalidArgument("box bounds must have dimension n")
        if not np.all(lb < ub):
            raise InvalidArgument("need lb < ub componentwise")

    @property
    def n(self) -> int:
        return self.smooth[0].n

    @property
    def m(self) -> int:
        return len(self.smooth)

    @property
    def sigma(self) -> float:
        """Common strong-convexity modulus of the smooth parts (0 if unknown)."""
        return min(f.sigma for f in self.smooth)

    @property
    def L(self) -> float | None:
        Ls = [f.L for f in self.smooth]
        return None if any(l is None for l in Ls) else max(Ls)

    def F(self, x, counter: EvalCounter | None = None) -> Array:
        return eval_objectives(self, x, counter)


def eval_objectives(problem: MultiObjectiveProblem, x, counter: EvalCounter | None = None) -> Array:
    """(F_1(x), ..., F_m(x)); bumps ``counter.n_f`` by m."""
    x = _as_vector(x, problem.n)
    out = np.array([f.value(x) + g.value(x) for f, g in zip(problem.smooth, problem.nonsmooth)])
    if counter is not None:
        counter.n_f += problem.m
    return out


def dominates(a, b) -> bool:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidArgument("objective vectors differ in length")
    return bool(np.all(a <= b) and np.any(a != b))


def nondominated_mask(values) -> Array:
    """Boolean mask of rows not dominated by any other row."""
    F = np.asarray(values, dtype=float)
    if F.size == 0:
        return np.zeros(0, dtype=bool)
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    ne = np.any(F[:, None, :] != F[None, :, :], axis=2)
    dominated_by = le & ne  # [i, k]: row i dominates row k
    return ~dominated_by.any(axis=0)


def nondominated_filter(points: Sequence[tuple]) -> list[tuple]:
    """Keep the (x, F(x)) pairs whose F is not dominated, in input order."""
    points = list(points)
    if not points:
        return []
    lengths = {len(np.atleast_1d(p[1])) for p in points}
    if len(lengths) != 1:
        raise InvalidArgument("objective vectors differ in length")
    mask = nondominated_mask([np.atleast_1d(p[1]) for p in points])
    return [p for p, keep in zip(points, mask) if keep]
