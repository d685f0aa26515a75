"""Problem definitions for u_t = div(f(u) grad(phi(x) + H'(u))).

A :class:`ProblemSpec` bundles the mobility ``f``, the entropy density ``H``
with its first three derivatives, the potential ``phi``, initial data and
optional manufactured solution.  Points ``x`` are arrays of shape
``(..., d)``; every callable is vectorized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

Array = np.ndarray
PRESET_NAMES = ("accuracy1d", "porous1d", "porous2d", "doublewell1d", "fermion2d", "boson1d")


class InadmissibleStateError(ValueError):
    """A state value lies outside the domain where the model functions are defined."""

    def __init__(self, message, element=None, point=None, value=None):
        super().__init__(message)
        self.element = element
        self.point = point
        self.value = value


@dataclass(frozen=True)
class Potential:
    value: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    laplacian: Callable[[Array], Array]


def zero_potential() -> Potential:
    return Potential(
        value=lambda x: np.zeros(np.shape(x)[:-1]),
        grad=lambda x: np.zeros(np.shape(x)),
        laplacian=lambda x: np.zeros(np.shape(x)[:-1]),
    )


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form u(x, t) with the derivatives needed by the generic source formula."""

    value: Callable[[Array, float], Array]
    dt: Callable[[Array, float], Array]
    grad: Callable[[Array, float], Array]
    laplacian: Callable[[Array, float], Array]


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    dim: int
    bounds: tuple
    boundary: str
    f: Callable[[Array], Array]
    df: Callable[[Array], Array]
    H: Callable[[Array], Array]
    dH: Callable[[Array], Array]
    d2H: Callable[[Array], Array]
    d3H: Optional[Callable[[Array], Array]]
    potential: Potential
    initial: Callable[[Array], Array]
    u_min: float = 1e-10
    # open interval on which H' is defined; None means the whole real line
    state_domain: Optional[tuple[float, float]] = None
    exact: Optional[ExactSolution] = None
    source: Optional[Callable[[Array, float], Array]] = None
    params: dict = field(default_factory=dict)

    def phi(self, x):
        return self.potential.value(x)

    def admissible(self, u) -> np.ndarray:
        if self.state_domain is None:
            return np.isfinite(u)
        lo, hi = self.state_domain
        return (u > lo) & (u < hi)

    def clip_to_domain(self, u, floor: float):
        """Pull ``u`` into ``[lo + floor, hi - floor]``; returns the clipped values and the interior mask."""
        if self.state_domain is None:
            return u, np.ones(np.shape(u), dtype=bool)
        lo, hi = self.state_domain
        a, b = lo + floor, hi - floor
        inside = (u > a) & (u < b)
        return np.clip(u, a, b), inside


def eval_entropy_density(spec: ProblemSpec, u, x):
    """u * phi(x) + H(u) with H(0) = 0."""
    u = np.asarray(u, dtype=float)
    if spec.state_domain is not None and not np.all(spec.admissible(u)):
        raise InadmissibleStateError(f"entropy density undefined for u outside {spec.state_domain}")
    return u * spec.phi(x) + spec.H(u)


def manufactured_source(spec: ProblemSpec, x, t: float):
    """S = u_t - div(f(u) grad(phi + H'(u))) evaluated on the closed-form solution."""
    if spec.source is not None:
        return spec.source(x, t)
    if spec.exact is None:
        raise ValueError(f"problem {spec.name!r} has no exact solution")
    return generic_source(spec, x, t)


def generic_source(spec: ProblemSpec, x, t: float):
    """Source from the chain rule; needs H''' and the potential derivatives."""
    if spec.exact is None:
        raise ValueError(f"problem {spec.name!r} has no exact solution")
    if spec.d3H is None:
        raise ValueError(f"problem {spec.name!r} does not provide H'''")
    ex = spec.exact
    u = ex.value(x, t)
    gu = ex.grad(x, t)
    lap_u = ex.laplacian(x, t)
    gphi = spec.potential.grad(x)
    grad_p = gphi + spec.d2H(u)[..., None] * gu
    lap_p = spec.potential.laplacian(x) + spec.d3H(u) * np.sum(gu * gu, axis=-1) + spec.d2H(u) * lap_u
    div_flux = spec.df(u) * np.sum(gu * grad_p, axis=-1) + spec.f(u) * lap_p
    return ex.dt(x, t) - div_flux


# --- closed-form entropy densities -------------------------------------------


def _porous_H(u):
    w = u - 0.5
    return np.where(u >= 0.5, (4.0 / 15.0) * w**5 + w**4 / 6.0, w**4 / 6.0) - 1.0 / 96.0


def _porous_dH(u):
    return (4.0 / 3.0) * (u - 0.5) ** 3 * np.maximum(u, 0.5)


def _porous_d2H(u):
    w = u - 0.5
    return np.where(u >= 0.5, 4.0 * w**2 * u + (4.0 / 3.0) * w**3, 2.0 * w**2)


def _porous_d3H(u):
    w = u - 0.5
    return np.where(u >= 0.5, 8.0 * w * u + 8.0 * w**2, 4.0 * w)


def _xlogx(u):
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)), 0.0)


def _fermion_H(u):
    return _xlogx(u) + _xlogx(1.0 - u)


def _boson_cubic_integral(u):
    """int_0^u ds / (1 + s^3)."""
    s3 = math.sqrt(3.0)
    return (
        np.log1p(u) / 3.0
        - np.log(u * u - u + 1.0) / 6.0
        + (np.arctan((2.0 * u - 1.0) / s3) + math.pi / 6.0) / s3
    )


def _boson_H(u):
    return _xlogx(u) - u * np.log1p(u**3) / 3.0 - _boson_cubic_integral(u)


# --- presets -----------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    problem: ProblemSpec
    elements: tuple[int, ...]
    degree: int
    dirk_order: int
    alpha: float
    final_time: float
    u_min: float


def _accuracy1d() -> ProblemSpec:
    def u(x, t):
        return math.exp(-t) * (1.0 - x[..., 0] ** 4) ** 5

    def ut(x, t):
        return -u(x, t)

    def ux(x, t):
        v = 1.0 - x[..., 0] ** 4
        return (math.exp(-t) * 5.0 * v**4 * (-4.0 * x[..., 0] ** 3))[..., None]

    def uxx(x, t):
        xx = x[..., 0]
        v = 1.0 - xx**4
        return math.exp(-t) * (320.0 * xx**6 * v**3 - 60.0 * xx**2 * v**4)

    def source(x, t):
        # u_t - (2/3) (u^3)_xx  with u^3 = e^{-3t} v^15, v = 1 - x^4
        xx = x[..., 0]
        v = 1.0 - xx**4
        d2 = 3360.0 * xx**6 * v**13 - 180.0 * xx**2 * v**14
        return -math.exp(-t) * v**5 - (2.0 / 3.0) * math.exp(-3.0 * t) * d2

    return ProblemSpec(
        name="accuracy1d",
        dim=1,
        bounds=(-1.0, 1.0),
        boundary="dirichlet",
        f=lambda u_: u_,
        df=lambda u_: np.ones_like(u_),
        H=lambda u_: u_**3 / 3.0,
        dH=lambda u_: u_**2,
        d2H=lambda u_: 2.0 * u_,
        d3H=lambda u_: 2.0 * np.ones_like(u_),
        potential=zero_potential(),
        initial=lambda x: u(x, 0.0),
        u_min=1e-14,
        exact=ExactSolution(u, ut, ux, uxx),
        source=source,
    )


def _porous1d() -> ProblemSpec:
    return ProblemSpec(
        name="porous1d",
        dim=1,
        bounds=(0.0, 1.0),
        boundary="zero_flux",
        f=lambda u: u,
        df=lambda u: np.ones_like(u),
        H=_porous_H,
        dH=_porous_dH,
        d2H=_porous_d2H,
        d3H=_porous_d3H,
        potential=zero_potential(),
        initial=lambda x: 0.5 - 0.5 * np.cos(2.0 * np.pi * x[..., 0]),
    )


def _porous2d() -> ProblemSpec:
    return ProblemSpec(
        name="porous2d",
        dim=2,
        bounds=((-6.0, 6.0), (-6.0, 6.0)),
        boundary="zero_flux",
        f=lambda u: u,
        df=lambda u: np.ones_like(u),
        H=lambda u: u**2,
        dH=lambda u: 2.0 * u,
        d2H=lambda u: 2.0 * np.ones_like(u),
        d3H=lambda u: np.zeros_like(u),
        potential=zero_potential(),
        initial=lambda x: np.exp(-0.5 * np.sum(x**2, axis=-1)),
    )


def _doublewell1d() -> ProblemSpec:
    pot = Potential(
        value=lambda x: 0.25 * x[..., 0] ** 4 - 0.5 * x[..., 0] ** 2,
        grad=lambda x: (x[..., 0] ** 3 - x[..., 0])[..., None],
        laplacian=lambda x: 3.0 * x[..., 0] ** 2 - 1.0,
    )
    return ProblemSpec(
        name="doublewell1d",
        dim=1,
        bounds=(-1.4, 1.4),
        boundary="zero_flux",
        f=lambda u: u,
        df=lambda u: np.ones_like(u),
        H=lambda u: 0.5 * u**2,
        dH=lambda u: u,
        d2H=lambda u: np.ones_like(u),
        d3H=lambda u: np.zeros_like(u),
        potential=pot,
        initial=lambda x: 0.2 / math.sqrt(0.4 * math.pi) * np.exp(-x[..., 0] ** 2 / 0.4),
    )


def _harmonic_potential() -> Potential:
    return Potential(
        value=lambda x: 0.5 * np.sum(x**2, axis=-1),
        grad=lambda x: np.array(x, dtype=float),
        laplacian=lambda x: np.full(np.shape(x)[:-1], float(np.shape(x)[-1])),
    )


def _fermion2d() -> ProblemSpec:
    def u0(x):
        total = 0.0
        for cx, cy in ((2, 2), (2, -2), (-2, 2), (-2, -2)):
            total = total + np.exp(-0.5 * ((x[..., 0] - cx) ** 2 + (x[..., 1] - cy) ** 2))
        return total / (2.0 * math.sqrt(2.0 * math.pi))

    return ProblemSpec(
        name="fermion2d",
        dim=2,
        bounds=((-10.0, 10.0), (-10.0, 10.0)),
        boundary="zero_flux",
        f=lambda u: u * (1.0 - u),
        df=lambda u: 1.0 - 2.0 * u,
        H=_fermion_H,
        dH=lambda u: np.log(u / (1.0 - u)),
        d2H=lambda u: 1.0 / (u * (1.0 - u)),
        d3H=lambda u: (2.0 * u - 1.0) / (u * (1.0 - u)) ** 2,
        potential=_harmonic_potential(),
        initial=u0,
        state_domain=(0.0, 1.0),
    )


def _boson1d(mass: float) -> ProblemSpec:
    def u0(x):
        xx = x[..., 0]
        return mass / (2.0 * math.sqrt(2.0 * math.pi)) * (
            np.exp(-0.5 * (xx - 2.0) ** 2) + np.exp(-0.5 * (xx + 2.0) ** 2)
        )

    return ProblemSpec(
        name="boson1d",
        dim=1,
        bounds=(-10.0, 10.0),
        boundary="zero_flux",
        f=lambda u: u * (1.0 + u**3),
        df=lambda u: 1.0 + 4.0 * u**3,
        H=_boson_H,
        dH=lambda u: np.log(u) - np.log1p(u**3) / 3.0,
        d2H=lambda u: 1.0 / (u * (1.0 + u**3)),
        d3H=lambda u: -(1.0 + 4.0 * u**3) / (u * (1.0 + u**3)) ** 2,
        potential=_harmonic_potential(),
        initial=u0,
        state_domain=(0.0, math.inf),
        params={"mass": mass},
    )


def preset(name: str, mass: float = 1.0) -> ExperimentPreset:
    """Configuration of one of the six reference experiments.

    ``mass`` only affects ``boson1d``; the default final time is 10 for
    subcritical mass and 1 otherwise.
    """
    if name == "accuracy1d":
        return ExperimentPreset(name, _accuracy1d(), (80,), 2, 3, 1.0, 1.0, 1e-14)
    if name == "porous1d":
        return ExperimentPreset(name, _porous1d(), (100,), 2, 3, 0.1, 0.1, 1e-10)
    if name == "porous2d":
        return ExperimentPreset(name, _porous2d(), (30, 30), 2, 3, 1.0, 1.0, 1e-10)
    if name == "doublewell1d":
        return ExperimentPreset(name, _doublewell1d(), (100,), 2, 3, 0.1, 1.0, 1e-10)
    if name == "fermion2d":
        return ExperimentPreset(name, _fermion2d(), (30, 30), 2, 3, 1.0, 2.0, 1e-10)
    if name == "boson1d":
        final = 10.0 if mass <= 2.0 else 1.0
        return ExperimentPreset(name, _boson1d(float(mass)), (100,), 2, 3, 1.0, final, 1e-10)
    raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")


def polynomial_problem(base: ProblemSpec, f_coeffs, dH_coeffs, name: str | None = None) -> ProblemSpec:
    """Replace f and H' of ``base`` by polynomials (coefficients in increasing degree).

    H is the antiderivative with H(0) = 0.
    """
    P = np.polynomial.Polynomial
    f = P(np.asarray(f_coeffs, dtype=float))
    dH = P(np.asarray(dH_coeffs, dtype=float))
    H = dH.integ()
    df, d2H, d3H = f.deriv(), dH.deriv(), dH.deriv(2)

    def vec(p):
        return lambda u: p(np.asarray(u, dtype=float)) + np.zeros_like(u, dtype=float)

    return replace(
        base,
        name=name or f"{base.name}-poly",
        f=vec(f),
        df=vec(df),
        H=vec(H),
        dH=vec(dH),
        d2H=vec(d2H),
        d3H=vec(d3H),
        state_domain=None,
        source=None,
    )
