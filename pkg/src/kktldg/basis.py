"""Quadrature rules and tensor-product Legendre bases on the reference element [-1, 1]^d."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from numpy.polynomial import legendre as npleg


@dataclass(frozen=True)
class QuadratureRule:
    kind: str
    points: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.weights)


def gauss_rule(n: int, dim: int = 1) -> QuadratureRule:
    """Gauss-Legendre rule with ``n`` points per axis (exact to degree 2n-1)."""
    if n < 1:
        raise ValueError(f"gauss rule needs n >= 1, got {n}")
    x, w = npleg.leggauss(n)
    return _tensorize("gauss", x, w, dim)


def gauss_lobatto_points_1d(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n < 2:
        raise ValueError(f"gauss-lobatto rule needs n >= 2, got {n}")
    # interior nodes are the roots of P'_{n-1}
    c = np.zeros(n)
    c[-1] = 1.0
    interior = np.sort(np.real(npleg.legroots(npleg.legder(c)))) if n > 2 else np.empty(0)
    x = np.concatenate(([-1.0], interior, [1.0]))
    pn = npleg.legval(x, c)
    w = 2.0 / (n * (n - 1) * pn**2)
    return x, w


def gauss_lobatto_rule(n: int, dim: int = 1) -> QuadratureRule:
    """Gauss-Lobatto rule with ``n`` points per axis, endpoints included (exact to degree 2n-3)."""
    x, w = gauss_lobatto_points_1d(n)
    return _tensorize("gauss_lobatto", x, w, dim)


def _tensorize(kind: str, x: np.ndarray, w: np.ndarray, dim: int) -> QuadratureRule:
    if dim == 1:
        return QuadratureRule(kind, x[:, None].copy(), w.copy())
    if dim != 2:
        raise ValueError(f"dimension must be 1 or 2, got {dim}")
    # first axis runs fastest, matching the basis ordering
    pts = np.array([(x[i], x[j]) for j, i in product(range(len(x)), repeat=2)])
    wts = np.array([w[i] * w[j] for j, i in product(range(len(x)), repeat=2)])
    return QuadratureRule(kind, pts, wts)


def legendre_table(k: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of P_0..P_k at ``x`` (unnormalized, P_l(1) = 1).

    Returns arrays of shape (len(x), k+1).
    """
    x = np.asarray(x, dtype=float)
    val = np.zeros(x.shape + (k + 1,))
    der = np.zeros_like(val)
    val[..., 0] = 1.0
    if k >= 1:
        val[..., 1] = x
        der[..., 1] = 1.0
    for l in range(1, k):
        val[..., l + 1] = ((2 * l + 1) * x * val[..., l] - l * val[..., l - 1]) / (l + 1)
        der[..., l + 1] = der[..., l - 1] + (2 * l + 1) * val[..., l]
    return val, der


@dataclass(frozen=True)
class Basis:
    """Tensor-product Legendre basis Q_k on [-1, 1]^d.

    Local index ``j = a + (k+1) * b`` for ``phi_j = P_a(xi) P_b(eta)`` in 2D.
    """

    degree: int
    dim: int

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("polynomial degree must be >= 0")
        if self.dim not in (1, 2):
            raise ValueError("dimension must be 1 or 2")

    @property
    def n_local(self) -> int:
        return (self.degree + 1) ** self.dim

    @property
    def multi_indices(self) -> np.ndarray:
        k1 = self.degree + 1
        if self.dim == 1:
            return np.arange(k1)[:, None]
        return np.array([(a, b) for b in range(k1) for a in range(k1)])

    def reference_mass(self) -> np.ndarray:
        """Diagonal of the reference-element mass matrix, prod_a 2/(2 l_a + 1)."""
        idx = self.multi_indices
        return np.prod(2.0 / (2.0 * idx + 1.0), axis=1)


def eval_basis(basis: Basis, ref_points) -> tuple[np.ndarray, np.ndarray]:
    """Tabulate basis values ``(npts, N_k)`` and reference gradients ``(d, npts, N_k)``."""
    pts = np.atleast_2d(np.asarray(ref_points, dtype=float))
    if pts.shape[1] != basis.dim:
        if basis.dim == 1 and pts.shape[0] == 1:
            pts = pts.T
        else:
            raise ValueError(f"expected points of dimension {basis.dim}, got shape {pts.shape}")
    if np.any(np.abs(pts) > 1.0 + 1e-12):
        raise ValueError("evaluation point outside the reference element [-1, 1]^d")
    k = basis.degree
    idx = basis.multi_indices
    vals1 = []
    ders1 = []
    for a in range(basis.dim):
        v, d = legendre_table(k, pts[:, a])
        vals1.append(v)
        ders1.append(d)
    values = np.ones((pts.shape[0], basis.n_local))
    for a in range(basis.dim):
        values *= vals1[a][:, idx[:, a]]
    grads = np.ones((basis.dim, pts.shape[0], basis.n_local))
    for g in range(basis.dim):
        for a in range(basis.dim):
            table = ders1[a] if a == g else vals1[a]
            grads[g] *= table[:, idx[:, a]]
    return values, grads
