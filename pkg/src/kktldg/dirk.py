"""Stiffly accurate DIRK tableaus, the limited stage loop and the step-size policy."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kkt import ConstraintSet, NonConvergence, SingularSystem, semismooth_newton
from .ldg import LDGDiscretization, StageProblem
from .model import InadmissibleStateError


@dataclass(frozen=True)
class ButcherTableau:
    a: np.ndarray
    b: np.ndarray
    order: int

    @property
    def c(self) -> np.ndarray:
        return self.a.sum(axis=1)

    @property
    def stages(self) -> int:
        return len(self.b)

    def is_stiffly_accurate(self, tol: float = 1e-15) -> bool:
        return bool(np.allclose(self.a[-1], self.b, atol=tol, rtol=0))


def tableau(order: int) -> ButcherTableau:
    """Stiffly accurate SDIRK tableau of the given order (1 to 4)."""
    if order == 1:
        a = np.array([[1.0]])
    elif order == 2:
        g = 1.0 - math.sqrt(2.0) / 2.0
        a = np.array([[g, 0.0], [1.0 - g, g]])
    elif order == 3:
        # Alexander's three-stage L-stable SDIRK
        g = 0.43586652150845899941
        b1 = -(6 * g**2 - 16 * g + 1) / 4.0
        b2 = (6 * g**2 - 20 * g + 5) / 4.0
        a = np.array([[g, 0, 0], [(1 - g) / 2.0, g, 0], [b1, b2, g]])
    elif order == 4:
        # Hairer-Wanner five-stage L-stable SDIRK, gamma = 1/4
        a = np.array(
            [
                [1 / 4, 0, 0, 0, 0],
                [1 / 2, 1 / 4, 0, 0, 0],
                [17 / 50, -1 / 25, 1 / 4, 0, 0],
                [371 / 1360, -137 / 2720, 15 / 544, 1 / 4, 0],
                [25 / 24, -49 / 48, 125 / 16, -85 / 12, 1 / 4],
            ]
        )
    else:
        raise ValueError(f"unsupported DIRK order {order}; choose 1, 2, 3 or 4")
    return ButcherTableau(a=a, b=a[-1].copy(), order=order)


class StepRejected(RuntimeError):
    def __init__(self, message: str, stage: int, cause: Exception | None = None):
        super().__init__(message)
        self.stage = stage
        self.cause = cause


@dataclass
class StepReport:
    newton_iterations: list = field(default_factory=list)
    active_counts: list = field(default_factory=list)
    lam_max: float = 0.0
    stiff_defect: float = 0.0


def advance_step(
    disc: LDGDiscretization,
    U: np.ndarray,
    t: float,
    tau: float,
    tab: ButcherTableau,
    constraints: ConstraintSet | None,
    lam=None,
    tol: float = 1e-10,
    max_iter: int = 25,
    line_search: bool = False,
):
    """One DIRK step; returns (U_next, lam_next, report) or raises StepRejected.

    ``constraints=None`` runs the unlimited scheme.  The input arrays are
    never modified.
    """
    Un = np.array(U, dtype=float)
    Ui = Un.copy()
    history = []
    report = StepReport()
    lam_i = None if lam is None else np.array(lam, dtype=float)
    force = np.zeros_like(Un)
    scale = 1.0 / disc.ops.mass
    for i in range(tab.stages):
        stage = StageProblem(disc, Un, tau, tab.a[i, : i + 1], t + tab.c[i] * tau, history)
        try:
            st = semismooth_newton(
                stage, Ui, constraints, lam0=lam_i, tol=tol, max_iter=max_iter, scale=scale, line_search=line_search
            )
        except (NonConvergence, SingularSystem, InadmissibleStateError, FloatingPointError) as exc:
            raise StepRejected(f"stage {i + 1}: {exc}", i, exc) from exc
        Ui = st.U
        report.newton_iterations.append(st.iterations)
        report.active_counts.append(st.n_active)
        history.append(stage.stage_record(Ui))
        if constraints is not None:
            lam_i = st.lam
            if len(st.lam):
                report.lam_max = max(report.lam_max, float(st.lam.max()))
            force = st.mu * stage.grad_h(Ui) - constraints.Phi.T @ st.lam
    # stiff accuracy: the b-weighted update plus the last stage's limiter force
    incr = sum(bi * bq for bi, (bq, _) in zip(tab.b, history))
    Ub = Un - (tau * incr + force) / disc.ops.mass
    report.stiff_defect = float(np.abs(Ub - Ui).max())
    return Ui, lam_i, report


@dataclass
class TimeController:
    tau: float
    tau_max: float
    tau_min: float
    growth: float = 1.2
    shrink: float = 0.5
    restarts: int = 0

    def __post_init__(self):
        if not (0 < self.tau_min <= self.tau_max):
            raise ValueError("need 0 < tau_min <= tau_max")
        self.tau = min(max(self.tau, self.tau_min), self.tau_max)


class TimestepUnderflow(RuntimeError):
    pass


def control_timestep(ctrl: TimeController, accepted: bool) -> float:
    """Grow by 1.2 (capped at tau_max) after success, halve after a rejection."""
    if accepted:
        ctrl.tau = min(ctrl.growth * ctrl.tau, ctrl.tau_max)
        return ctrl.tau
    ctrl.restarts += 1
    new = ctrl.shrink * ctrl.tau
    if new < ctrl.tau_min * (1 - 1e-12):
        raise TimestepUnderflow(f"time step {new:.3e} fell below tau_min = {ctrl.tau_min:.3e}")
    ctrl.tau = new
    return new
