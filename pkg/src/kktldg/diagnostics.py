"""Entropy, mass, error norms, convergence tables and per-step records."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
import scipy.sparse.linalg as spla

from .basis import eval_basis, gauss_rule
from .ldg import LDGDiscretization, StageProblem


@dataclass(frozen=True)
class StepRecord:
    step: int
    time: float
    tau: float
    entropy: float
    mass: float
    min_u: float
    max_u: float
    n_active: int
    lam_max: float
    newton_iterations: int
    restarts: int
    change_rate: float
    stiff_defect: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def values(self) -> list:
        return list(asdict(self).values())


def discrete_entropy(disc: LDGDiscretization, U) -> float:
    """E_h = int (U_h phi + H(U_h)) with the volume quadrature of the scheme."""
    Uq, Ue, _ = disc.state(U)
    dens = Uq * disc.phi_qn + disc.problem.H(Ue)
    return float(np.sum(dens * disc.wJn))


def total_mass(disc: LDGDiscretization, U) -> float:
    return float(disc.mass_weights @ U)


def min_u(disc: LDGDiscretization, U) -> float:
    """Minimum of U_h over the constraint (Gauss-Lobatto) points."""
    return float(disc.at_constraint_points(U).min())


def max_u(disc: LDGDiscretization, U) -> float:
    return float(disc.at_constraint_points(U).max())


def error_norms(disc: LDGDiscretization, U, t: float, samples: int | None = None):
    """(L_inf, L1, L2) errors against the exact solution.

    L_inf is sampled on an equispaced grid of at least 4(k+1) points per axis
    in every element; L1 and L2 use a Gauss rule with k+6 points per axis.
    """
    ex = disc.problem.exact
    if ex is None:
        raise ValueError(f"problem {disc.problem.name!r} has no exact solution")
    k, dim = disc.basis.degree, disc.dim
    n = max(samples or 0, 4 * (k + 1))
    s = np.linspace(-1.0, 1.0, n)
    grid = s[:, None] if dim == 1 else np.array([(a, b) for b in s for a in s])
    table, _ = eval_basis(disc.basis, grid)
    x = disc.mesh.map_points(grid)
    linf = float(np.abs(disc.local(U) @ table.T - ex.value(x, t)).max())

    rule = gauss_rule(k + 6, dim)
    V, _ = eval_basis(disc.basis, rule.points)
    x = disc.mesh.map_points(rule.points)
    diff = np.abs(disc.local(U) @ V.T - ex.value(x, t))
    w = rule.weights * disc.mesh.jacobian
    l1 = float(np.sum(diff * w))
    l2 = float(math.sqrt(np.sum(diff**2 * w)))
    return linf, l1, l2


def change_rate(disc: LDGDiscretization, U_new, U_old, tau: float) -> float:
    """max |U^{n+1}_h - U^n_h| over the constraint points, divided by tau."""
    return float(np.abs(disc.at_constraint_points(np.asarray(U_new) - U_old)).max() / tau)


def timestep_bound(disc: LDGDiscretization, U, t: float = 0.0) -> tuple[float, float, float]:
    """Empirical (sigma, c, sigma / (4 c)) for the uniform P-function step bound.

    c is taken as half the spectral norm of the spatial tangent B dQ/dU at U,
    which bounds the two tau-terms of the monotonicity estimate at this state.
    The value is a diagnostic only; the true constant is a bound over the
    whole admissible set and is not computable.
    """
    sigma = disc.ops.sigma
    stage = StageProblem(disc, U, 1.0, [1.0], t)
    K = stage.tangent(U, with_mass=False)
    if min(K.shape) > 2:
        smax = float(spla.svds(K.astype(float), k=1, return_singular_vectors=False, random_state=0)[0])
    else:
        smax = float(np.linalg.norm(K.toarray(), 2))
    c = 0.5 * smax
    return sigma, c, (sigma / (4.0 * c) if c > 0 else math.inf)


@dataclass(frozen=True)
class ConvergenceRow:
    elements: int
    linf: float
    linf_order: float
    l1: float
    l1_order: float
    min_u: float


@dataclass(frozen=True)
class ConvergenceTable:
    degree: int
    rows: tuple[ConvergenceRow, ...]

    def to_csv(self) -> str:
        lines = ["# kktldg convergence table v1", "elements,linf,linf_order,l1,l1_order,min_u"]
        for r in self.rows:
            lines.append(
                ",".join([str(r.elements)] + [format_float(v) for v in (r.linf, r.linf_order, r.l1, r.l1_order, r.min_u)])
            )
        return "\n".join(lines) + "\n"


def convergence_table(degree: int, elements, linf, l1, min_values) -> ConvergenceTable:
    """Observed orders log2(e_{M/2} / e_M) for successively doubled meshes."""
    elements = [int(m) for m in elements]
    for a, b in zip(elements, elements[1:]):
        if b != 2 * a:
            raise ValueError(f"mesh sequence must double, got {elements}")
    rows = []
    for i, m in enumerate(elements):
        if i == 0:
            o_inf = o_1 = math.nan
        else:
            o_inf = math.log2(linf[i - 1] / linf[i])
            o_1 = math.log2(l1[i - 1] / l1[i])
        rows.append(ConvergenceRow(m, float(linf[i]), o_inf, float(l1[i]), o_1, float(min_values[i])))
    return ConvergenceTable(degree, tuple(rows))


def format_float(v) -> str:
    return format(float(v), ".17g")
