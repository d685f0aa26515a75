"""Uniform 1D interval and 2D rectangle meshes with face connectivity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BOUNDARY_KINDS = ("zero_flux", "periodic", "dirichlet")


@dataclass(frozen=True)
class AxisFaces:
    """Faces normal to one coordinate axis.

    Interior faces store the element on the low side (``left``) and on the
    high side (``right``).  Boundary faces store the owning element and the
    sign of the outward normal (-1 on the lower wall, +1 on the upper wall).
    """

    left: np.ndarray
    right: np.ndarray
    boundary_element: np.ndarray
    boundary_side: np.ndarray


@dataclass(frozen=True)
class Mesh:
    dim: int
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    counts: tuple[int, ...]
    boundary: str
    faces: tuple[AxisFaces, ...]

    @property
    def h(self) -> tuple[float, ...]:
        return tuple((u - l) / n for l, u, n in zip(self.lower, self.upper, self.counts))

    @property
    def n_elements(self) -> int:
        return int(np.prod(self.counts))

    @property
    def n_interior_faces(self) -> int:
        return sum(len(f.left) for f in self.faces)

    @property
    def n_boundary_faces(self) -> int:
        return sum(len(f.boundary_element) for f in self.faces)

    @property
    def volume(self) -> float:
        return float(np.prod([u - l for l, u in zip(self.lower, self.upper)]))

    @property
    def jacobian(self) -> float:
        """Determinant of the affine reference-to-physical map."""
        return float(np.prod([hh / 2.0 for hh in self.h]))

    def element_index(self, *ijk: int) -> int:
        if self.dim == 1:
            return ijk[0]
        return ijk[0] + self.counts[0] * ijk[1]

    def element_corners(self) -> np.ndarray:
        """Lower-left corner of each element, shape (n_elements, dim)."""
        grids = [lo + hh * np.arange(n) for lo, hh, n in zip(self.lower, self.h, self.counts)]
        if self.dim == 1:
            return grids[0][:, None]
        gx, gy = np.meshgrid(grids[0], grids[1], indexing="xy")
        return np.column_stack([gx.ravel(), gy.ravel()])

    def map_points(self, ref_points: np.ndarray) -> np.ndarray:
        """Physical coordinates of reference points in every element, shape (n_e, n_pts, dim)."""
        ref = np.atleast_2d(ref_points)
        corners = self.element_corners()
        h = np.asarray(self.h)
        return corners[:, None, :] + (ref[None, :, :] + 1.0) * (h / 2.0)

    def locate(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Element index and reference coordinates for physical points ``x`` (n, dim)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        h = np.asarray(self.h)
        lo = np.asarray(self.lower)
        cell = np.floor((x - lo) / h).astype(int)
        cell = np.clip(cell, 0, np.asarray(self.counts) - 1)
        ref = 2.0 * (x - lo - cell * h) / h - 1.0
        if self.dim == 1:
            return cell[:, 0], ref
        return cell[:, 0] + self.counts[0] * cell[:, 1], ref


def build_mesh(dimension: int, bounds, counts, boundary_kind: str = "zero_flux") -> Mesh:
    """Build a uniform mesh on a box.

    ``bounds`` is ``(lo, hi)`` in 1D or ``((xlo, xhi), (ylo, yhi))`` in 2D;
    ``counts`` is an int or one int per axis.
    """
    if dimension not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {dimension}")
    if boundary_kind not in BOUNDARY_KINDS:
        raise ValueError(f"unknown boundary kind {boundary_kind!r}")
    bounds = np.asarray(bounds, dtype=float)
    if dimension == 1:
        bounds = bounds.reshape(1, 2)
    elif bounds.shape == (2,):
        bounds = np.vstack([bounds, bounds])
    if np.ndim(counts) == 0:
        counts = (int(counts),) * dimension
    counts = tuple(int(c) for c in counts)
    if len(counts) != dimension or bounds.shape != (dimension, 2):
        raise ValueError("bounds/counts do not match the dimension")
    if any(c < 1 for c in counts):
        raise ValueError(f"element counts must be positive, got {counts}")
    if np.any(bounds[:, 1] <= bounds[:, 0]):
        raise ValueError(f"bounds must be increasing, got {bounds.tolist()}")

    nx = counts[0]
    ny = counts[1] if dimension == 2 else 1
    ids = np.arange(nx * ny).reshape(ny, nx)  # ids[iy, ix]
    faces = []
    for axis in range(dimension):
        grid = ids if axis == 0 else ids.T  # rows run along the axis
        lo_elem, hi_elem = grid[:, :-1].ravel(), grid[:, 1:].ravel()
        if boundary_kind == "periodic":
            left = np.concatenate([lo_elem, grid[:, -1]])
            right = np.concatenate([hi_elem, grid[:, 0]])
            belem = np.empty(0, dtype=int)
            bside = np.empty(0, dtype=int)
        else:
            left, right = lo_elem, hi_elem
            belem = np.concatenate([grid[:, 0], grid[:, -1]])
            bside = np.concatenate([-np.ones(grid.shape[0], int), np.ones(grid.shape[0], int)])
        faces.append(AxisFaces(left.astype(int), right.astype(int), belem.astype(int), bside))
    return Mesh(
        dim=dimension,
        lower=tuple(bounds[:, 0]),
        upper=tuple(bounds[:, 1]),
        counts=counts,
        boundary=boundary_kind,
        faces=tuple(faces),
    )
