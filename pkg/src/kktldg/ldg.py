"""LDG operators for u_t = div(q), q = f(u) s, s = grad p, p = phi + H'(u).

Unknown layout: scalar fields are ``K * N_k + j``; vector fields put the
axis first, ``a * N + K * N_k + j`` with ``N = N_e * N_k``.

Sign conventions for the assembled matrices (test function phi_i):

* ``B @ Q``  = (q_h, grad phi_i) - sum_K (q_hat . nu, phi_i)_dK
* ``A @ P``  = -(p_h, div eta_i) + sum_K (p_hat, nu . eta_i)_dK
* ``D(U)``   = (phi + H'(U_h), phi_i)
* ``C(U)``   = (f(U_h) phi_j, phi_i), repeated once per axis in ``C_d``

so that ``P = M^-1 D``, ``S = Mv^-1 (A P + g_D)``, ``Q = Mv^-1 C_d S`` and a
stage residual reads ``M (U - U^n) + tau * sum_j a_ij (B Q_j - F_j)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import Basis, eval_basis, gauss_lobatto_rule, gauss_rule
from .mesh import Mesh
from .model import InadmissibleStateError, ProblemSpec

FLUX_CHOICES = ("right_q_left_p", "left_q_right_p")
QUADRATURE_CHOICES = ("gauss", "gauss_lobatto")


def block_diagonal(blocks: np.ndarray) -> sp.csr_matrix:
    """Sparse block-diagonal matrix from an ``(n_blocks, r, c)`` array."""
    nb, r, c = blocks.shape
    bsr = sp.bsr_matrix((blocks, np.arange(nb), np.arange(nb + 1)), shape=(nb * r, nb * c))
    return bsr.tocsr()


@dataclass(frozen=True)
class OperatorSet:
    mass: np.ndarray  # diagonal of M
    vmass: np.ndarray  # diagonal of the vector mass matrix
    B: sp.csr_matrix
    A: sp.csr_matrix
    boundary_flux: np.ndarray  # Q -> sum over boundary faces of (q_hat . nu, 1)

    @property
    def sigma(self) -> float:
        """Smallest eigenvalue of the scalar mass matrix."""
        return float(self.mass.min())

    @property
    def M(self) -> sp.csr_matrix:
        return sp.diags(self.mass).tocsr()

    @property
    def Mv(self) -> sp.csr_matrix:
        return sp.diags(self.vmass).tocsr()


class LDGDiscretization:
    """Mesh, basis, quadrature tables and assembled operators for one problem.

    ``admissibility`` controls model evaluation when the state leaves the
    domain of H' (log-type entropies): ``"strict"`` raises
    :class:`InadmissibleStateError`, ``"floor"`` evaluates H' and H'' at the
    state clipped ``u_floor`` inside the domain.
    """

    def __init__(
        self,
        mesh: Mesh,
        problem: ProblemSpec,
        degree: int,
        flux: str = "right_q_left_p",
        quad_points: int | None = None,
        constraint_points: int | None = None,
        admissibility: str = "floor",
        u_floor: float | None = None,
        quadrature: str = "gauss",
    ):
        if flux not in FLUX_CHOICES:
            raise ValueError(f"unknown flux choice {flux!r}")
        if quadrature not in QUADRATURE_CHOICES:
            raise ValueError(f"unknown quadrature {quadrature!r}")
        if admissibility not in ("floor", "strict"):
            raise ValueError(f"unknown admissibility mode {admissibility!r}")
        if mesh.dim != problem.dim:
            raise ValueError("mesh and problem dimensions differ")
        self.mesh = mesh
        self.problem = problem
        self.basis = Basis(degree, mesh.dim)
        self.flux = flux
        self.admissibility = admissibility
        self.u_floor = problem.u_min if u_floor is None else u_floor
        self.dim = mesh.dim
        self.nk = self.basis.n_local
        self.ne = mesh.n_elements
        self.N = self.ne * self.nk

        # exact Gauss rule for the linear operators and the load vectors
        self.quad = gauss_rule(degree + 2, self.dim)
        self.V, G = eval_basis(self.basis, self.quad.points)
        h = np.asarray(mesh.h)
        self.G = G * (2.0 / h)[:, None, None]
        self.wJ = self.quad.weights * mesh.jacobian
        self.xq = mesh.map_points(self.quad.points)

        # rule for the state-dependent integrals (D, C, entropy)
        self.quadrature = quadrature
        if quadrature == "gauss":
            self.nl_quad = gauss_rule(degree + 2 if quad_points is None else quad_points, self.dim)
        else:
            self.nl_quad = gauss_lobatto_rule(max(degree + 1 if quad_points is None else quad_points, 2), self.dim)
        self.Vn, _ = eval_basis(self.basis, self.nl_quad.points)
        self.wJn = self.nl_quad.weights * mesh.jacobian
        self.xqn = mesh.map_points(self.nl_quad.points)
        self.phi_qn = problem.phi(self.xqn)

        n_gl = degree + 1 if constraint_points is None else constraint_points
        self.constraint_rule = gauss_lobatto_rule(max(n_gl, 2), self.dim) if n_gl >= 2 else None
        if self.constraint_rule is None:
            # k = 0: the only Gauss-Lobatto-type point of a constant is its value
            self.constraint_table = np.ones((1, 1))
            self.constraint_ref = np.zeros((1, self.dim))
        else:
            self.constraint_ref = self.constraint_rule.points
            self.constraint_table, _ = eval_basis(self.basis, self.constraint_ref)
        self.ops = self._assemble()

    # ------------------------------------------------------------------ basics

    @property
    def mass_weights(self) -> np.ndarray:
        """Integral of each global basis function, (M w)_j with w the coefficients of 1."""
        w = np.zeros(self.N)
        w[:: self.nk] = 1.0
        return self.ops.mass * w

    def constant_coefficients(self, c: float = 1.0) -> np.ndarray:
        U = np.zeros(self.N)
        U[:: self.nk] = c
        return U

    def local(self, U: np.ndarray) -> np.ndarray:
        return np.asarray(U).reshape(self.ne, self.nk)

    def at_quadrature(self, U: np.ndarray) -> np.ndarray:
        """U_h at the nonlinear quadrature points, shape (N_e, nq)."""
        return self.local(U) @ self.Vn.T

    def at_constraint_points(self, U: np.ndarray) -> np.ndarray:
        return self.local(U) @ self.constraint_table.T

    def evaluate(self, U: np.ndarray, ref_points) -> np.ndarray:
        """Values of U_h at the same reference points in every element, shape (N_e, n_pts)."""
        table, _ = eval_basis(self.basis, ref_points)
        return self.local(U) @ table.T

    def evaluate_physical(self, U: np.ndarray, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.dim == 1 and x.shape[1] != 1:
            x = x.reshape(-1, 1)
        elem, ref = self.mesh.locate(x)
        table, _ = eval_basis(self.basis, np.clip(ref, -1.0, 1.0))
        return np.einsum("pj,pj->p", self.local(U)[elem], table)

    def project(self, fun, n_points: int | None = None) -> np.ndarray:
        """Unconstrained L2 projection of ``fun(x)`` (x of shape (..., d))."""
        return self.moments(fun, n_points) / self.ops.mass

    def moments(self, fun, n_points: int | None = None) -> np.ndarray:
        """Vector of (fun, phi_i) by a high-order Gauss rule."""
        rule = gauss_rule(n_points or self.basis.degree + 6, self.dim)
        V, _ = eval_basis(self.basis, rule.points)
        x = self.mesh.map_points(rule.points)
        vals = fun(x) * (rule.weights * self.mesh.jacobian)
        return (vals @ V).ravel()

    def load(self, values_q: np.ndarray) -> np.ndarray:
        """(g, phi_i) for g given at the Gauss points ``xq``, shape (N_e, nq)."""
        return ((values_q * self.wJ) @ self.V).ravel()

    def nl_load(self, values_q: np.ndarray) -> np.ndarray:
        """(g, phi_i) for g given at the nonlinear quadrature points ``xqn``."""
        return ((values_q * self.wJn) @ self.Vn).ravel()

    def source_load(self, t: float) -> np.ndarray | None:
        if self.problem.source is None and self.problem.exact is None:
            return None
        from .model import manufactured_source

        return self.load(manufactured_source(self.problem, self.xq, t))

    # ------------------------------------------------------------- model terms

    def state(self, U: np.ndarray, strict: bool | None = None):
        """U_h at volume quadrature points, its domain-clipped version and the interior mask."""
        Uq = self.at_quadrature(U)
        if not np.all(np.isfinite(Uq)):
            e, q = np.argwhere(~np.isfinite(Uq))[0]
            raise InadmissibleStateError(f"non-finite state in element {e} at point {q}", e, q, Uq[e, q])
        strict = self.admissibility == "strict" if strict is None else strict
        if strict and self.problem.state_domain is not None:
            ok = self.problem.admissible(Uq)
            if not np.all(ok):
                e, q = np.argwhere(~ok)[0]
                raise InadmissibleStateError(
                    f"state {Uq[e, q]:.3e} outside {self.problem.state_domain} in element {e} at "
                    f"quadrature point {q} (x = {self.xqn[e, q].tolist()})",
                    e,
                    q,
                    Uq[e, q],
                )
        Ue, inside = self.problem.clip_to_domain(Uq, self.u_floor)
        return Uq, Ue, inside

    def assemble_D(self, U: np.ndarray, strict: bool | None = None) -> np.ndarray:
        """D_i = (phi(x) + H'(U_h), phi_i)."""
        _, Ue, _ = self.state(U, strict)
        return self.nl_load(self.phi_qn + self.problem.dH(Ue))

    def assemble_C_blocks(self, U: np.ndarray, strict: bool | None = None) -> np.ndarray:
        Uq, _, _ = self.state(U, strict)
        fw = self.problem.f(Uq) * self.wJn
        return np.einsum("eq,qi,qj->eij", fw, self.Vn, self.Vn)

    def assemble_C(self, U: np.ndarray, strict: bool | None = None) -> sp.csr_matrix:
        return block_diagonal(self.assemble_C_blocks(U, strict))

    def assemble_Cd(self, U: np.ndarray, strict: bool | None = None) -> sp.csr_matrix:
        blocks = self.assemble_C_blocks(U, strict)
        return block_diagonal(np.concatenate([blocks] * self.dim, axis=0))

    def assemble_DU(self, U: np.ndarray) -> sp.csr_matrix:
        """Derivative of D: entries (H''(U_h) phi_j, phi_i)."""
        _, Ue, inside = self.state(U)
        w = self.problem.d2H(Ue) * inside * self.wJn
        return block_diagonal(np.einsum("eq,qi,qj->eij", w, self.Vn, self.Vn))

    def assemble_dC(self, U: np.ndarray, S: np.ndarray) -> sp.csr_matrix:
        """Derivative of C_d(U) S with respect to U, shape (d N, N)."""
        Uq, _, _ = self.state(U)
        dfw = self.problem.df(Uq) * self.wJn
        blocks = []
        for a in range(self.dim):
            s_q = self.at_quadrature(S[a * self.N : (a + 1) * self.N])
            blocks.append(block_diagonal(np.einsum("eq,qi,qk->eik", dfw * s_q, self.Vn, self.Vn)))
        return sp.vstack(blocks).tocsr()

    # ----------------------------------------------------------- LDG chain

    def dirichlet_load(self, t: float) -> np.ndarray | None:
        """Boundary datum contribution of p_hat to the s-equation (Dirichlet meshes only)."""
        if self.mesh.boundary != "dirichlet":
            return None
        ex = self.problem.exact
        if ex is None:
            raise ValueError("Dirichlet boundaries need an exact solution for the boundary data")
        g = np.zeros(self.dim * self.N)
        for a, tab in enumerate(self._face_tables):
            faces = self.mesh.faces[a]
            for side in (-1, 1):
                elems = faces.boundary_element[faces.boundary_side == side]
                T = tab["plus"] if side > 0 else tab["minus"]
                ref = tab["ref_plus"] if side > 0 else tab["ref_minus"]
                x = self.mesh.map_points(ref)[elems]  # (nb, nf, d)
                pb = self.problem.phi(x) + self.problem.dH(ex.value(x, t))
                contrib = side * (pb * tab["w"]) @ T  # (nb, nk)
                rows = a * self.N + elems[:, None] * self.nk + np.arange(self.nk)
                np.add.at(g, rows, contrib)
        return g

    def chain(self, U: np.ndarray, t: float = 0.0):
        """P, S, Q for the state U (boundary data evaluated at time t)."""
        ops = self.ops
        P = self.assemble_D(U) / ops.mass
        rhs = ops.A @ P
        gd = self.dirichlet_load(t)
        if gd is not None:
            rhs = rhs + gd
        S = rhs / ops.vmass
        Q = (self.assemble_Cd(U) @ S) / ops.vmass
        return P, S, Q

    def dissipation(self, U: np.ndarray, t: float = 0.0) -> float:
        """S^T C_d(U) S = (f(U_h) s_h, s_h)."""
        _, S, _ = self.chain(U, t)
        return float(S @ (self.assemble_Cd(U) @ S))

    # ----------------------------------------------------------- assembly

    def _assemble(self) -> OperatorSet:
        mesh, nk, N, dim = self.mesh, self.nk, self.N, self.dim
        mass_local = self.basis.reference_mass() * mesh.jacobian
        mass = np.tile(mass_local, self.ne)
        vmass = np.tile(mass, dim)

        self._face_tables = [self._face_table(a) for a in range(dim)]
        Brows, Bcols, Bvals = [], [], []
        Arows, Acols, Avals = [], [], []
        bflux = np.zeros(dim * N)
        elems = np.arange(self.ne)
        loc = np.arange(nk)

        def add(lists, r_elem, r_off, c_elem, c_off, block, sign):
            r = r_off + r_elem[:, None, None] * nk + loc[None, :, None]
            c = c_off + c_elem[:, None, None] * nk + loc[None, None, :]
            lists[0].append(np.broadcast_to(r, (len(r_elem), nk, nk)).ravel())
            lists[1].append(np.broadcast_to(c, (len(r_elem), nk, nk)).ravel())
            lists[2].append(np.broadcast_to(sign * block, (len(r_elem), nk, nk)).ravel())

        Bl = (Brows, Bcols, Bvals)
        Al = (Arows, Acols, Avals)
        for a in range(dim):
            off = a * N
            # (phi_j, d_a phi_i) on every element
            vol = np.einsum("q,qi,qj->ij", self.wJ, self.G[a], self.V)
            add(Bl, elems, 0, elems, off, vol, 1.0)
            add(Al, elems, off, elems, 0, vol, -1.0)

            tab = self._face_tables[a]
            Fpp, Fpm, Fmp, Fmm = tab["pp"], tab["pm"], tab["mp"], tab["mm"]
            faces = mesh.faces[a]
            L, R = faces.left, faces.right
            if self.flux == "right_q_left_p":
                add(Bl, L, 0, R, off, Fpm, -1.0)
                add(Bl, R, 0, R, off, Fmm, 1.0)
                add(Al, L, off, L, 0, Fpp, 1.0)
                add(Al, R, off, L, 0, Fmp, -1.0)
            else:
                add(Bl, L, 0, L, off, Fpp, -1.0)
                add(Bl, R, 0, L, off, Fmp, 1.0)
                add(Al, L, off, R, 0, Fpm, 1.0)
                add(Al, R, off, R, 0, Fmm, -1.0)

            for side in (-1, 1):
                be = faces.boundary_element[faces.boundary_side == side]
                if len(be) == 0:
                    continue
                Fss = Fpp if side > 0 else Fmm
                T = tab["plus"] if side > 0 else tab["minus"]
                if mesh.boundary == "zero_flux":
                    # q_hat . nu = 0, p_hat = interior trace
                    add(Al, be, off, be, 0, Fss, float(side))
                elif mesh.boundary == "dirichlet":
                    # q_hat = interior trace, p_hat = boundary datum (load vector)
                    add(Bl, be, 0, be, off, Fss, -float(side))
                    trace_int = tab["w"] @ T  # integral of phi_j over the face
                    rows = off + be[:, None] * nk + loc
                    np.add.at(bflux, rows, side * np.broadcast_to(trace_int, rows.shape))

        def build(lists, shape):
            r, c, v = (np.concatenate(x) for x in lists)
            m = sp.coo_matrix((v, (r, c)), shape=shape).tocsr()
            m.sum_duplicates()
            m.eliminate_zeros()
            return m

        B = build(Bl, (N, dim * N))
        A = build(Al, (dim * N, N))
        return OperatorSet(mass=mass, vmass=vmass, B=B, A=A, boundary_flux=bflux)

    def _face_table(self, axis: int) -> dict:
        """Traces of the basis on the low (minus) and high (plus) face normal to ``axis``."""
        if self.dim == 1:
            t = np.zeros(1)
            w = np.ones(1)
        else:
            rule = gauss_rule(self.basis.degree + 2, 1)
            t = rule.points[:, 0]
            other = 1 - axis
            w = rule.weights * self.mesh.h[other] / 2.0
        refs = {}
        for name, val in (("plus", 1.0), ("minus", -1.0)):
            pts = np.zeros((len(t), self.dim))
            pts[:, axis] = val
            if self.dim == 2:
                pts[:, 1 - axis] = t
            refs[name] = pts
        Tp, _ = eval_basis(self.basis, refs["plus"])
        Tm, _ = eval_basis(self.basis, refs["minus"])

        def face(Ti, Tj):
            return np.einsum("q,qi,qj->ij", w, Ti, Tj)

        return {
            "w": w,
            "plus": Tp,
            "minus": Tm,
            "ref_plus": refs["plus"],
            "ref_minus": refs["minus"],
            "pp": face(Tp, Tp),
            "pm": face(Tp, Tm),
            "mp": face(Tm, Tp),
            "mm": face(Tm, Tm),
        }


# ---------------------------------------------------------------- free functions


def assemble_mass(disc: LDGDiscretization):
    return disc.ops.M, disc.ops.Mv


def assemble_flux_ops(disc: LDGDiscretization):
    return disc.ops.B, disc.ops.A


def assemble_D(U, disc: LDGDiscretization):
    return disc.assemble_D(U)


def assemble_Cd(U, disc: LDGDiscretization):
    return disc.assemble_Cd(U)


class StageProblem:
    """Nonlinear residual of one implicit stage.

    L(U) = M (U - U^n) + tau * sum_{j<i} a_ij (B Q_j - F_j) + tau * a_ii (B Q(U) - F_i)

    ``history`` holds ``(B Q_j - F_j, boundary flux_j + int S_j)`` for the
    completed stages; ``F`` are manufactured-source loads (zero when absent).
    """

    def __init__(
        self,
        disc: LDGDiscretization,
        Un: np.ndarray,
        tau: float,
        a_row,
        t_stage: float,
        history=(),
    ):
        a_row = np.atleast_1d(np.asarray(a_row, dtype=float))
        if len(a_row) != len(history) + 1:
            raise ValueError("tableau row length must equal completed stages + 1")
        self.disc = disc
        self.Un = np.asarray(Un, dtype=float)
        self.tau = float(tau)
        self.a_row = a_row
        self.a_ii = float(a_row[-1])
        self.t = float(t_stage)
        self.history = list(history)
        ops = disc.ops
        self._Mw = disc.mass_weights
        self.mass_n = float(self._Mw @ self.Un)
        src = disc.source_load(self.t)
        self.F = np.zeros(disc.N) if src is None else src
        self.explicit = np.zeros(disc.N)
        self.explicit_mass = 0.0
        for a_ij, (bq_j, flux_j) in zip(a_row[:-1], self.history):
            self.explicit += a_ij * bq_j
            self.explicit_mass += a_ij * flux_j
        self._has_bflux = np.any(ops.boundary_flux != 0)
        self._cache_key = None
        self._cache = None

    # cached chain evaluation; Newton calls residual, h and jacobian at the same U
    def _chain(self, U):
        key = U.tobytes()
        if key != self._cache_key:
            P, S, Q = self.disc.chain(U, self.t)
            self._cache = (P, S, Q)
            self._cache_key = key
        return self._cache

    def BQ(self, U) -> np.ndarray:
        return self.disc.ops.B @ self._chain(U)[2]

    def boundary_flux(self, U) -> float:
        return float(self.disc.ops.boundary_flux @ self._chain(U)[2])

    def stage_record(self, U):
        """History entry of a finished stage."""
        return self.BQ(U) - self.F, self.boundary_flux(U) + self._source_mass()

    def _source_mass(self) -> float:
        # (S, 1) is the sum of the constant-mode loads
        return float(self.F[:: self.disc.nk].sum())

    def residual(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        ops = self.disc.ops
        return ops.mass * (U - self.Un) + self.tau * (self.explicit + self.a_ii * (self.BQ(U) - self.F))

    def jacobian(self, U) -> sp.csr_matrix:
        return self.tangent(U, with_mass=True)

    def dQ(self, U) -> sp.csr_matrix:
        """Derivative of Q(U) with respect to U, shape (d N, N)."""
        disc, ops = self.disc, self.disc.ops
        _, S, _ = self._chain(U)
        Mvi = sp.diags(1.0 / ops.vmass)
        Mi = sp.diags(1.0 / ops.mass)
        inner = disc.assemble_Cd(U) @ (Mvi @ (ops.A @ (Mi @ disc.assemble_DU(U))))
        return (Mvi @ (inner + disc.assemble_dC(U, S))).tocsr()

    def tangent(self, U, with_mass: bool = True) -> sp.csr_matrix:
        ops = self.disc.ops
        J = (self.tau * self.a_ii) * (ops.B @ self.dQ(U))
        if with_mass:
            J = J + ops.M
        return J.tocsr()

    def h(self, U) -> float:
        """Mass equality constraint: int U^n + tau sum_j a_ij (flux_j + int S_j) - int U_h."""
        U = np.asarray(U, dtype=float)
        current = self._source_mass()
        if self._has_bflux:
            current += self.boundary_flux(U)
        return self.mass_n + self.tau * (self.explicit_mass + self.a_ii * current) - float(self._Mw @ U)

    def grad_h(self, U) -> np.ndarray:
        g = -self._Mw.copy()
        if self._has_bflux:
            g += self.tau * self.a_ii * (self.dQ(U).T @ self.disc.ops.boundary_flux)
        return g


def stage_operator_L(disc: LDGDiscretization, U, Un, tau, a_row, t_stage=0.0, history=()):
    return StageProblem(disc, Un, tau, a_row, t_stage, history).residual(U)


def stage_jacobian(disc: LDGDiscretization, U, Un, tau, a_row, t_stage=0.0, history=()):
    return StageProblem(disc, Un, tau, a_row, t_stage, history).jacobian(U)
