"""Positivity/mass constraints and the active-set semi-smooth Newton solver.

For a stage residual L(U) the limited problem is the mixed complementarity
system

    L(U) + grad h(U)^T mu + grad g^T lam = 0,   h(U) = 0,   min(-g(U), lam) = 0

with g_j = u_min - U_h(x_j) at the Gauss-Lobatto points (affine, so
grad g = -Phi) and h the mass balance.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ldg import LDGDiscretization
from .model import InadmissibleStateError


class NonConvergence(RuntimeError):
    def __init__(self, iterations: int, residual: float, message: str | None = None):
        super().__init__(message or f"Newton did not converge in {iterations} iterations (residual {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class SingularSystem(RuntimeError):
    def __init__(self, message: str, active=None):
        super().__init__(message)
        self.active = active


@dataclass(frozen=True)
class ConstraintSet:
    """g(U) = u_min - Phi U and the mass weights used by h."""

    Phi: sp.csr_matrix
    u_min: float
    mass_weights: np.ndarray

    @classmethod
    def from_discretization(cls, disc: LDGDiscretization, u_min: float | None = None) -> "ConstraintSet":
        from .ldg import block_diagonal

        table = disc.constraint_table
        Phi = block_diagonal(np.broadcast_to(table, (disc.ne,) + table.shape).copy())
        return cls(Phi=Phi, u_min=disc.problem.u_min if u_min is None else float(u_min), mass_weights=disc.mass_weights)

    @property
    def m(self) -> int:
        return self.Phi.shape[0]

    def g(self, U) -> np.ndarray:
        return self.u_min - self.Phi @ U

    @property
    def grad_g(self) -> sp.csr_matrix:
        return -self.Phi


def eval_g(U, constraints: ConstraintSet) -> np.ndarray:
    return constraints.g(U)


def eval_h(U, problem) -> float:
    return problem.h(U)


@dataclass
class KktState:
    U: np.ndarray
    mu: float
    lam: np.ndarray
    active: np.ndarray
    iterations: int = 0
    residual: float = np.inf
    history: list = field(default_factory=list)

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.active))


def kkt_residual(U, mu, lam, problem, constraints: ConstraintSet) -> np.ndarray:
    """F(z) = (L + grad h^T mu + grad g^T lam, -h, min(-g, lam))."""
    L = problem.residual(U)
    r1 = L + problem.grad_h(U) * mu - constraints.Phi.T @ lam
    r2 = -problem.h(U)
    r3 = np.minimum(-constraints.g(U), lam)
    return np.concatenate([r1, [r2], r3])


def semismooth_newton(
    problem,
    U0,
    constraints: ConstraintSet | None,
    lam0=None,
    mu0: float = 0.0,
    tol: float = 1e-10,
    max_iter: int = 25,
    feas_tol: float = 1e-13,
    scale=None,
    line_search: bool = False,
) -> KktState:
    """Solve the limited stage system; ``constraints=None`` gives plain Newton on L = 0.

    ``problem`` provides ``residual``, ``jacobian``, ``h`` and ``grad_h``.
    Besides ``||F||_inf <= tol`` convergence requires ``max g <= feas_tol``:
    with u_min as small as 1e-10 the residual test alone would accept
    bound violations of the size of u_min itself.

    ``scale`` (typically the inverse mass diagonal) measures the first
    residual block in coefficient units, which keeps the tolerance meaningful
    on fine meshes.  Iteration stops when the scaled residual reaches ``tol``,
    or when the plain residual is below ``tol`` and the scaled one has
    stopped decreasing (roundoff floor of ill-conditioned stages).

    By default the full semi-smooth Newton step is taken and failures are
    left to the step-size control; ``line_search=True`` adds Armijo
    backtracking on the squared scaled residual.
    """
    U = np.array(U0, dtype=float)
    w = 1.0 if scale is None else np.asarray(scale, dtype=float)
    if constraints is None:
        return _plain_newton(problem, U, tol, max_iter, w, line_search)
    m = constraints.m
    lam = np.zeros(m) if lam0 is None else np.maximum(np.asarray(lam0, dtype=float), 0.0)
    mu = float(mu0)
    Phi = constraints.Phi

    def evaluate(U, mu, lam):
        L = problem.residual(U)
        g = constraints.g(U)
        h = problem.h(U)
        gh = problem.grad_h(U)
        r1 = L + gh * mu - Phi.T @ lam
        r3 = np.minimum(-g, lam)
        merit = float(np.sum((r1 * w) ** 2) + h * h + np.sum(r3 * r3))
        return L, g, h, gh, r1, r3, merit

    history = []
    prev_scaled = np.inf
    L, g, h, gh, r1, r3, merit = evaluate(U, mu, lam)
    for it in range(max_iter + 1):
        rest = max(abs(h), np.abs(r3).max() if m else 0.0)
        res = max(np.abs(r1).max(), rest)
        scaled = max(np.abs(r1 * w).max(), rest)
        history.append(res)
        active = -g <= lam
        if not np.isfinite(res):
            raise NonConvergence(it, res, f"non-finite KKT residual at iteration {it}")
        done = scaled <= tol or (res <= tol and scaled > 0.5 * prev_scaled)
        prev_scaled = scaled
        if done and (m == 0 or g.max() <= feas_tol):
            return KktState(U, mu, np.where(active, lam, 0.0), active, it, res, history)
        if it == max_iter:
            break
        J = problem.jacobian(U)
        PhiA = Phi[np.flatnonzero(active)]
        nA = PhiA.shape[0]
        gcol = sp.csr_matrix(gh[:, None])
        K = sp.bmat(
            [
                [J, gcol, -PhiA.T],
                [-gcol.T, None, None],
                [-PhiA, None, None],
            ],
            format="csc",
        )
        rhs = np.concatenate([-L, [h], -g[active]])
        try:
            sol = _sparse_solve(K, rhs)
        except RuntimeError as exc:  # factorization failure
            raise SingularSystem(str(exc), active.copy()) from exc
        if not np.all(np.isfinite(sol)):
            raise SingularSystem(f"singular KKT matrix with {nA} active constraints", active.copy())
        N = len(U)
        lam_full = np.zeros(m)
        lam_full[active] = sol[N + 1 :]
        dU, dmu, dlam = sol[:N], float(sol[N]) - mu, lam_full - lam
        U, mu, lam, (L, g, h, gh, r1, r3, merit) = _backtrack(
            evaluate, U, mu, lam, dU, dmu, dlam, merit, line_search
        )
    raise NonConvergence(max_iter, history[-1])


def _backtrack(evaluate, U, mu, lam, dU, dmu, dlam, merit, enabled=True, min_step=2.0**-10):
    """Armijo backtracking on the squared residual; the full step is tried first."""
    if not enabled:
        full = (U + dU, mu + dmu, None if lam is None else lam + dlam)
        return full + (evaluate(*full),)
    s = 1.0
    while True:
        trial = (U + s * dU, mu + s * dmu, None if lam is None else lam + s * dlam)
        try:
            vals = evaluate(*trial)
        except InadmissibleStateError:
            vals = (np.inf,)
        if np.isfinite(vals[-1]) and (vals[-1] <= (1.0 - 1e-4 * s) * merit or s <= min_step):
            # below min_step the short step is kept anyway; the iteration
            # limit of the caller decides
            return trial + (vals,)
        if s <= min_step:
            raise NonConvergence(0, np.inf, "no finite residual along the Newton direction")
        s *= 0.5


def _sparse_solve(K, rhs) -> np.ndarray:
    # minimum degree on A^T + A gives far less fill than COLAMD for these stencils
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", spla.MatrixRankWarning)
        lu = spla.splu(sp.csc_matrix(K), permc_spec="MMD_AT_PLUS_A")
    return lu.solve(rhs)


def _plain_newton(problem, U, tol, max_iter, w=1.0, line_search=False) -> KktState:
    def evaluate(U, mu, lam):
        L = problem.residual(U)
        return L, float(np.sum((L * w) ** 2))

    history = []
    prev_scaled = np.inf
    L, merit = evaluate(U, 0.0, None)
    for it in range(max_iter + 1):
        res = float(np.abs(L).max())
        scaled = float(np.abs(L * w).max())
        history.append(res)
        if not np.isfinite(res):
            raise NonConvergence(it, res, f"non-finite residual at iteration {it}")
        done = scaled <= tol or (res <= tol and scaled > 0.5 * prev_scaled)
        prev_scaled = scaled
        if done:
            return KktState(U, 0.0, np.zeros(0), np.zeros(0, bool), it, res, history)
        if it == max_iter:
            break
        J = problem.jacobian(U).tocsc()
        try:
            dU = _sparse_solve(J, -L)
        except RuntimeError as exc:
            raise SingularSystem(str(exc)) from exc
        if not np.all(np.isfinite(dU)):
            raise SingularSystem("singular stage Jacobian")
        U, _, _, (L, merit) = _backtrack(evaluate, U, 0.0, None, dU, 0.0, None, merit, line_search)
    raise NonConvergence(max_iter, history[-1])


class ProjectionProblem:
    """Constrained L2 projection: L(U) = M U - b, h(U) = int u0 - int U_h."""

    def __init__(self, disc: LDGDiscretization, b: np.ndarray):
        self.mass = disc.ops.mass
        self.b = np.asarray(b, dtype=float)
        self.w = disc.mass_weights
        # int u0 equals the sum of the constant-mode moments
        self.total = float(self.b[:: disc.nk].sum())
        self.M = disc.ops.M

    def residual(self, U):
        return self.mass * U - self.b

    def jacobian(self, U):
        return self.M

    def h(self, U) -> float:
        return self.total - float(self.w @ U)

    def grad_h(self, U):
        return -self.w


def project_initial(
    disc: LDGDiscretization,
    u0=None,
    constraints: ConstraintSet | None = None,
    limiter: bool = True,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> KktState:
    """L2 projection of the initial data, limited to U_h >= u_min at the constraint points."""
    u0 = disc.problem.initial if u0 is None else u0
    b = disc.moments(u0)
    prob = ProjectionProblem(disc, b)
    if not limiter:
        U = b / disc.ops.mass
        return KktState(U, 0.0, np.zeros(0), np.zeros(0, bool), 0, 0.0, [])
    cs = ConstraintSet.from_discretization(disc) if constraints is None else constraints
    mean = prob.total / disc.mesh.volume
    if mean < cs.u_min:
        raise ValueError(f"mean of the initial data {mean:.3e} is below u_min = {cs.u_min:.3e}")
    return semismooth_newton(prob, b / disc.ops.mass, cs, tol=tol, max_iter=max_iter, scale=1.0 / disc.ops.mass)
