"""The direction-finding subproblem min_d max_j Q_j(x, d).

Q_j(x, d) = grad f_j(x)'d + 0.5 d'H_j d + g_j(x + d) - g_j(x), where H_j is
the Hessian of f_j at x (Newton-type model) or ell * I (proximal-gradient
model). Each g_j is a max of smooth pieces, so the epigraph form

    min t   s.t.   q_j(d) + psi_jk(x + d) - g_j(x) <= t   for every (j, k)

is a smooth convex program. It is solved here with a primal-dual
log-barrier Newton method started from the strictly feasible point
(d, t) = (0, 1); multipliers are the dual variables of the pieces summed per
objective.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .problem import EvalCounter, InvalidArgument, MultiObjectiveProblem, _as_vector

log = logging.getLogger(__name__)

Array = np.ndarray

MU_MIN = 1e-8
DEFAULT_TOL = 1e-8


class SubproblemError(RuntimeError):
    """Barrier iteration cap exceeded; ``best`` holds the last iterate."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


class NotPositiveDefinite(InvalidArgument):
    pass


@dataclass(frozen=True)
class MinimaxModel:
    x: Array
    grads: Array  # (m, n)
    hessians: Array  # (m, n, n), without the mu shift
    g_at_x: Array  # (m,)
    pieces: tuple  # per objective, tuple of ConvexPiece
    mu: float = 0.0

    @property
    def m(self) -> int:
        return self.grads.shape[0]

    @property
    def n(self) -> int:
        return self.grads.shape[1]

    def smooth_part(self, j: int, d: Array) -> float:
        H = self.hessians[j]
        return float(self.grads[j] @ d + 0.5 * d @ H @ d + 0.5 * self.mu * d @ d)

    def piece_values(self, j: int, d: Array) -> Array:
        y = self.x + d
        return np.array([p.value(y) for p in self.pieces[j]]) - self.g_at_x[j]

    def Q(self, d) -> Array:
        """Vector (Q_1(x, d), ..., Q_m(x, d))."""
        d = np.asarray(d, dtype=float)
        return np.array([self.smooth_part(j, d) + self.piece_values(j, d).max() for j in range(self.m)])

    def value(self, d) -> float:
        return float(self.Q(d).max())

    def permuted(self, order) -> "MinimaxModel":
        order = list(order)
        return MinimaxModel(self.x, self.grads[order], self.hessians[order], self.g_at_x[order],
                            tuple(self.pieces[j] for j in order), self.mu)


@dataclass
class SubproblemSolution:
    d: Array
    t: float
    lam: Array
    active: list
    kkt_residual: float
    iterations: int = 0
    # Convex weights over pieces of each objective; xi_j = sum_k w_jk grad psi_jk.
    piece_weights: list | None = None
    trace: list = field(default_factory=list)

    def trace_json(self) -> str:
        return json.dumps(self.trace)


def regularization(hessians: Array) -> float:
    """Shift keeping every H_j + mu I safely positive definite."""
    lam_min = min(float(np.linalg.eigvalsh(0.5 * (H + H.T))[0]) for H in hessians)
    if lam_min >= MU_MIN:
        return 0.0
    scale = max(float(np.abs(H).sum(axis=1).max()) for H in hessians)
    return 1e-6 * (1.0 + scale)


def forward_difference_derivatives(f, x: Array) -> tuple[Array, Array]:
    """Gradient and Hessian of ``f`` from function values only.

    Gradient step is 1e-6 (1 + |x_i|). The Hessian uses a larger step,
    eps^(1/4) (1 + |x_i|), since its truncation/rounding balance differs.
    """
    n = x.shape[0]
    fx = f.value(x)
    h = 1e-6 * (1.0 + np.abs(x))
    grad = np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h[i]
        grad[i] = (f.value(x + e) - fx) / h[i]
    hh = np.finfo(float).eps ** 0.25 * (1.0 + np.abs(x))
    fi = np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = hh[i]
        fi[i] = f.value(x + e)
    H = np.empty((n, n))
    for i in range(n):
        for k in range(i, n):
            e = np.zeros(n)
            e[i] += hh[i]
            e[k] += hh[k]
            H[i, k] = H[k, i] = (f.value(x + e) - fi[i] - fi[k] + fx) / (hh[i] * hh[k])
    return grad, H


def build_model(problem: MultiObjectiveProblem, x, mu: float | None = None,
                derivatives: str = "analytic", counter: EvalCounter | None = None) -> MinimaxModel:
    """Newton-type model at ``x``. ``mu=None`` applies the automatic shift."""
    x = _as_vector(x, problem.n)
    if mu is not None and mu < 0:
        raise InvalidArgument("mu must be >= 0")
    grads, hessians = [], []
    for f in problem.smooth:
        if derivatives == "analytic":
            gr, H = np.asarray(f.gradient(x), dtype=float), np.asarray(f.hessian(x), dtype=float)
        elif derivatives == "forward-difference":
            gr, H = forward_difference_derivatives(f, x)
        else:
            raise InvalidArgument(f"unknown derivative mode {derivatives!r}")
        grads.append(gr)
        hessians.append(0.5 * (H + H.T))
    if counter is not None:
        counter.n_grad += problem.m
        counter.n_hess += problem.m
    hessians = np.array(hessians)
    if mu is None:
        mu = regularization(hessians)
    g_at_x = np.array([g.value(x) for g in problem.nonsmooth])
    return MinimaxModel(x, np.array(grads), hessians, g_at_x,
                        tuple(g.pieces for g in problem.nonsmooth), float(mu))


def build_prox_model(problem: MultiObjectiveProblem, x, ell: float,
                     derivatives: str = "analytic", counter: EvalCounter | None = None) -> MinimaxModel:
    """Proximal-gradient model: linearized f_j plus (ell/2)||d||^2."""
    x = _as_vector(x, problem.n)
    if ell <= 0:
        raise InvalidArgument("ell must be > 0")
    grads = []
    for f in problem.smooth:
        if derivatives == "analytic":
            grads.append(np.asarray(f.gradient(x), dtype=float))
        else:
            grads.append(forward_difference_derivatives(f, x)[0])
    if counter is not None:
        counter.n_grad += problem.m
    n, m = problem.n, problem.m
    hessians = np.broadcast_to(ell * np.eye(n), (m, n, n)).copy()
    g_at_x = np.array([g.value(x) for g in problem.nonsmooth])
    return MinimaxModel(x, np.array(grads), hessians, g_at_x,
                        tuple(g.pieces for g in problem.nonsmooth), 0.0)


class _Epigraph:
    """Constraint values and derivatives of the epigraph program in z = (d, t)."""

    def __init__(self, model: MinimaxModel):
        self.model = model
        self.owner = []
        self.pieces = []
        for j, ps in enumerate(model.pieces):
            for p in ps:
                self.owner.append(j)
                self.pieces.append(p)
        self.owner = np.array(self.owner)
        n = model.n
        self.Hs = model.hessians + model.mu * np.eye(n)[None]

    def values(self, d: Array, t: float) -> Array:
        mdl = self.model
        y = mdl.x + d
        q = np.array([mdl.smooth_part(j, d) for j in range(mdl.m)])
        psi = np.array([p.value(y) for p in self.pieces])
        return q[self.owner] + psi - mdl.g_at_x[self.owner] - t

    def derivatives(self, d: Array) -> tuple[Array, Array]:
        """Gradients wrt d (ncons, n) and Hessians wrt d (ncons, n, n)."""
        mdl = self.model
        y = mdl.x + d
        gq = mdl.grads + np.einsum("jab,b->ja", self.Hs, d)
        G = np.array([p.gradient(y) for p in self.pieces]) + gq[self.owner]
        Hc = np.array([p.hessian(y) for p in self.pieces]) + self.Hs[self.owner]
        return G, Hc


def _multipliers(owner: Array, lam_i: Array, m: int) -> tuple[Array, list]:
    lam = np.zeros(m)
    np.add.at(lam, owner, lam_i)
    weights = []
    for j in range(m):
        w = lam_i[owner == j]
        s = w.sum()
        weights.append(w / s if s > 0 else np.eye(len(w))[0])
    total = lam.sum()
    lam = lam / total if total > 0 else np.full(m, 1.0 / m)
    return lam, weights


def _active(Qv: Array, t: float) -> list:
    tol = 1e-9 * (1.0 + abs(t))
    return [j for j, q in enumerate(Qv) if q >= t - tol]


def _hull_multipliers(model: MinimaxModel) -> tuple[Array, list]:
    """Multipliers certifying d = 0: the min-norm point of conv{grad f_j(x) + grad psi_jk(x)}.

    Only pieces active at x enter. Solved as NNLS with the simplex constraint
    appended as a heavily weighted row.
    """
    cols, owner, slot = [], [], []
    sizes = [len(ps) for ps in model.pieces]
    for j, ps in enumerate(model.pieces):
        vals = np.array([p.value(model.x) for p in ps])
        gmax = vals.max()
        for k, p in enumerate(ps):
            if vals[k] >= gmax - 1e-9 * (1.0 + abs(gmax)):
                cols.append(model.grads[j] + p.gradient(model.x))
                owner.append(j)
                slot.append(k)
    V = np.array(cols).T
    big = 1e3 * (1.0 + np.abs(V).max())
    A = np.vstack([V, big * np.ones((1, V.shape[1]))])
    b = np.append(np.zeros(V.shape[0]), big)
    w = nnls(A, b, maxiter=50 * A.shape[1])[0]
    w = w / w.sum()
    lam = np.zeros(model.m)
    weights = [np.zeros(size) for size in sizes]
    for wi, j, k in zip(w, owner, slot):
        lam[j] += wi
        weights[j][k] += wi
    weights = [wj / wj.sum() if wj.sum() > 0 else np.eye(len(wj))[0] for wj in weights]
    return lam, weights


def _solution(model, epi, d, lam_i, its) -> SubproblemSolution:
    lam, weights = _multipliers(epi.owner, np.maximum(lam_i, 0.0), model.m)
    Qv = model.Q(d)
    t = float(Qv.max())
    sol = SubproblemSolution(d.copy(), t, lam, _active(Qv, t), 0.0, its, weights)
    sol.kkt_residual = kkt_residual(model, sol)
    if t > 0:
        # Q(x, 0) = 0, so d = 0 is never worse. A roundoff-sized t keeps d when
        # that satisfies the optimality system better.
        zero = np.zeros_like(d)
        lam0, weights0 = _hull_multipliers(model)
        alt = SubproblemSolution(zero, 0.0, lam0, _active(model.Q(zero), 0.0), 0.0, its, weights0)
        alt.kkt_residual = kkt_residual(model, alt)
        if t > DEFAULT_TOL * 1e-3 or alt.kkt_residual <= sol.kkt_residual:
            return alt
    return sol


def _initial_barrier(model: MinimaxModel) -> float:
    """max(1, S/10) with S = max_j 0.5 c_j' H_j^-1 c_j, the decrease scale of the quadratic part."""
    n = model.n
    S = 0.0
    for c, H in zip(model.grads, model.hessians):
        S = max(S, 0.5 * float(c @ np.linalg.solve(H + model.mu * np.eye(n), c)))
    return max(1.0, 0.1 * S)


def _center(epi: _Epigraph, d: Array, t: float, mu_b: float, max_its: int = 200):
    """Damped Newton on t - mu_b * sum log(s_i); gives a well-scaled start."""
    n = d.shape[0]
    c = epi.values(d, t)
    its = 0
    for its in range(1, max_its + 1):
        G, Hc = epi.derivatives(d)
        s = -c
        lam_i = mu_b / s
        grad = np.append(lam_i @ G, 1.0 - lam_i.sum())
        J = np.hstack([G, -np.ones((len(s), 1))])
        H = (J.T * (lam_i / s)) @ J
        H[:n, :n] += np.einsum("i,iab->ab", lam_i, Hc)
        step = np.linalg.lstsq(H, -grad, rcond=None)[0]
        dec2 = float(-grad @ step)
        if dec2 <= 1e-2 * mu_b:
            break
        phi = t - mu_b * np.log(s).sum()
        alpha = 1.0
        while alpha > 1e-12:
            d_new, t_new = d + alpha * step[:n], t + alpha * step[n]
            c_new = epi.values(d_new, t_new)
            if np.all(c_new < 0) and t_new - mu_b * np.log(-c_new).sum() <= phi - 0.25 * alpha * dec2:
                break
            alpha *= 0.5
        if alpha <= 1e-12:
            break
        d, t, c = d_new, t_new, c_new
    return d, t, its


def solve(model: MinimaxModel, tol: float = DEFAULT_TOL, max_newton: int = 200,
          verbose: bool = False) -> SubproblemSolution:
    """Minimize max_j Q_j(x, d) over d.

    Primal-dual Newton on the barrier KKT system (lam_i * s_i = mu_b), with
    the barrier target mu_b set to a tenth of the current average
    complementarity at every step. Stops once the gap s'lam is below tol/10
    and the KKT residual is below tol.
    """
    if tol <= 0:
        raise InvalidArgument("tol must be > 0")
    n = model.n
    for H in model.hessians:
        if np.linalg.eigvalsh(H + model.mu * np.eye(n))[0] <= 0:
            raise NotPositiveDefinite("model Hessian is not positive definite; use mu > 0")

    epi = _Epigraph(model)
    nc = len(epi.pieces)
    d = np.zeros(n)
    t = 1.0
    mu0 = _initial_barrier(model)
    d, t, n_center = _center(epi, d, t, mu0)
    s = -epi.values(d, t)
    lam_i = mu0 / s
    trace = []
    best = None

    def residuals(G, s, lam_i, mu_b):
        r_dual = np.empty(n + 1)
        r_dual[:n] = lam_i @ G
        r_dual[n] = 1.0 - lam_i.sum()
        return r_dual, lam_i * s - mu_b

    G, Hc = epi.derivatives(d)
    for it in range(max_newton):
        gap = float(s @ lam_i)
        r_dual, _ = residuals(G, s, lam_i, 0.0)
        if verbose:
            trace.append({"iter": it, "gap": gap, "dual_res": float(np.abs(r_dual).max()), "t": float(t)})
        if gap <= 0.1 * tol and np.abs(r_dual).max() <= 0.1 * tol:
            best = _solution(model, epi, d, lam_i, n_center + it)
            if best.kkt_residual <= tol:
                break
        mu_b = 0.1 * gap / nc
        r_dual, r_cent = residuals(G, s, lam_i, mu_b)
        J = np.hstack([G, -np.ones((nc, 1))])
        H = (J.T * (lam_i / s)) @ J
        H[:n, :n] += np.einsum("i,iab->ab", lam_i, Hc)
        rhs = -r_dual + J.T @ (r_cent / s)
        try:
            dz = np.linalg.solve(H, rhs)
        except np.linalg.LinAlgError:
            dz = np.linalg.lstsq(H, rhs, rcond=None)[0]
        dlam = (lam_i * (J @ dz) - r_cent) / s

        neg = dlam < 0
        alpha = min(1.0, 0.99 * float(np.min(-lam_i[neg] / dlam[neg]))) if neg.any() else 1.0
        rnorm = np.sqrt(np.sum(r_dual**2) + np.sum(r_cent**2))
        while alpha > 1e-14:
            d_new, t_new = d + alpha * dz[:n], t + alpha * dz[n]
            s_new = -epi.values(d_new, t_new)
            if np.all(s_new > 0):
                lam_new = lam_i + alpha * dlam
                G_new, Hc_new = epi.derivatives(d_new)
                rd, rc = residuals(G_new, s_new, lam_new, mu_b)
                if np.sqrt(np.sum(rd**2) + np.sum(rc**2)) <= (1 - 0.01 * alpha) * rnorm:
                    break
            alpha *= 0.5
        if alpha <= 1e-14:
            log.debug("subproblem line search stalled at iteration %d", it)
            break
        d, t, s, lam_i, G, Hc = d_new, t_new, s_new, lam_new, G_new, Hc_new
    else:
        it = max_newton

    if best is None or best.kkt_residual > tol:
        best = _solution(model, epi, d, lam_i, n_center + it)
        best.trace = trace
        if best.kkt_residual > tol:
            raise SubproblemError(f"subproblem KKT residual {best.kkt_residual:.3e} above tol {tol:.1e} "
                                  f"after {it} Newton steps", best)
    best.trace = trace
    if verbose:
        log.debug("subproblem trace %s", best.trace_json())
    return best


def kkt_residual(model: MinimaxModel, solution: SubproblemSolution) -> float:
    """Max violation of the optimality system at (d, t, lambda).

    Terms: stationarity ||sum_j lam_j (grad f_j + H_j d + xi_j)||_inf,
    complementarity lam_j |Q_j - t|, feasibility (Q_j - t)_+, |sum lam - 1|,
    and, when piece weights are given, how far the weighted pieces are from
    active (lam_j w_jk (g_j(x+d) - psi_jk(x+d))), which keeps xi_j a
    subgradient of g_j at x + d.
    """
    d = np.asarray(solution.d, dtype=float)
    lam = np.asarray(solution.lam, dtype=float)
    t = float(solution.t)
    y = model.x + d
    n = model.n
    stat = np.zeros(n)
    piece_gap = 0.0
    for j in range(model.m):
        pieces = model.pieces[j]
        vals = np.array([p.value(y) for p in pieces])
        gy = vals.max()
        if solution.piece_weights is not None:
            w = np.asarray(solution.piece_weights[j], dtype=float)
            xi = sum(wk * p.gradient(y) for wk, p in zip(w, pieces))
            piece_gap = max(piece_gap, float(np.max(lam[j] * w * (gy - vals))))
        else:
            k = int(np.argmax(vals >= gy - 1e-9 * (1 + abs(gy))))
            xi = pieces[k].gradient(y)
        stat += lam[j] * (model.grads[j] + model.hessians[j] @ d + model.mu * d + xi)
    Qv = model.Q(d)
    return float(max(np.abs(stat).max(),
                     np.max(lam * np.abs(Qv - t)),
                     np.max(np.maximum(Qv - t, 0.0)),
                     abs(lam.sum() - 1.0),
                     piece_gap))


def is_critical(problem: MultiObjectiveProblem, x, eps: float, mu: float | None = None,
                tol: float = DEFAULT_TOL) -> bool:
    if eps <= 0:
        raise InvalidArgument("eps must be > 0")
    sol = solve(build_model(problem, x, mu), tol)
    return bool(np.linalg.norm(sol.d) < eps)
