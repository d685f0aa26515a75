import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kktldg import ConstraintSet, NonConvergence, StageProblem, project_initial, semismooth_newton
from kktldg.kkt import ProjectionProblem, SingularSystem, kkt_residual

from conftest import small_disc
from oracles import enumerate_active_sets


def _dip(depth, shift):
    return lambda x: 0.2 + depth * np.sin(7.0 * x[..., 0] + shift)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.6), st.floats(0.0, 6.28), st.integers(0, 1))
def test_projection_matches_enumeration(depth, shift, k):
    disc = small_disc("porous1d", degree=k, counts=(3,))
    cs = ConstraintSet.from_discretization(disc, 1e-10)
    b = disc.moments(_dip(depth, shift))
    prob = ProjectionProblem(disc, b)
    ref = enumerate_active_sets(prob, cs, b / disc.ops.mass)
    assert len(ref) >= 1
    st_ = semismooth_newton(prob, b / disc.ops.mass, cs, tol=1e-13, max_iter=50)
    for U, mu, lam in ref:
        np.testing.assert_allclose(st_.U, U, atol=1e-8)
        assert abs(st_.mu - mu) < 1e-8
        np.testing.assert_allclose(st_.lam, lam, atol=1e-8)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 0.3), st.floats(0.0, 6.28))
def test_nonlinear_stage_matches_enumeration(depth, shift):
    disc = small_disc("porous1d", degree=1, counts=(3,))
    cs = ConstraintSet.from_discretization(disc, 1e-10)
    Un = disc.project(_dip(depth, shift))
    stage = StageProblem(disc, Un, 1e-3, [1.0], 0.0)
    U0 = Un.copy()
    st_ = semismooth_newton(stage, U0, cs, tol=1e-13, max_iter=50)
    ref = enumerate_active_sets(stage, cs, np.maximum(U0, 0.05))
    assert len(ref) >= 1
    for U, mu, lam in ref:
        np.testing.assert_allclose(st_.U, U, atol=1e-8)
        np.testing.assert_allclose(st_.lam, lam, atol=1e-8)


def test_complementarity_and_mass():
    disc = small_disc("porous1d", degree=2, counts=(8,))
    cs = ConstraintSet.from_discretization(disc, 1e-10)
    st_ = project_initial(disc, _dip(0.5, 1.0), cs)
    g = cs.g(st_.U)
    assert g.max() <= 1e-13
    assert st_.lam.min() >= 0
    assert np.abs(st_.lam * g).max() < 1e-12
    assert st_.n_active > 0
    b = disc.moments(_dip(0.5, 1.0))
    assert abs(disc.mass_weights @ st_.U - b[:: disc.nk].sum()) < 1e-13
    F = kkt_residual(st_.U, st_.mu, st_.lam, ProjectionProblem(disc, b), cs)
    assert np.abs(F[disc.N :]).max() < 1e-12


def test_inactive_limiter_equals_plain_projection():
    disc = small_disc("porous1d", degree=2, counts=(8,))
    cs = ConstraintSet.from_discretization(disc, 1e-10)
    f = lambda x: 1.0 + 0.5 * np.sin(2 * np.pi * x[..., 0])
    st_ = project_initial(disc, f, cs)
    assert st_.n_active == 0
    np.testing.assert_allclose(st_.U, disc.project(f), atol=1e-14)


def test_projection_rejects_low_mean():
    disc = small_disc("porous1d", degree=1, counts=(4,))
    cs = ConstraintSet.from_discretization(disc, 1e-10)
    with pytest.raises(ValueError):
        project_initial(disc, lambda x: -1.0 + 0 * x[..., 0], cs)


def test_limiter_off_projection_can_be_negative():
    disc = small_disc("porous1d", degree=2, counts=(4,))
    st_ = project_initial(disc, _dip(0.5, 0.0), limiter=False)
    assert disc.at_constraint_points(st_.U).min() < 0


def test_plain_newton_without_constraints():
    disc = small_disc("porous1d", degree=1, counts=(4,))
    Un = disc.project(lambda x: 0.5 + 0.3 * np.cos(2 * np.pi * x[..., 0]))
    stage = StageProblem(disc, Un, 0.01, [1.0], 0.0)
    st_ = semismooth_newton(stage, Un, None, tol=1e-13)
    assert np.abs(stage.residual(st_.U)).max() < 1e-12


def test_nonconvergence_raised():
    disc = small_disc("porous1d", degree=1, counts=(4,))
    Un = disc.project(lambda x: 0.5 + 0.3 * np.cos(2 * np.pi * x[..., 0]))
    stage = StageProblem(disc, Un, 10.0, [1.0], 0.0)
    cs = ConstraintSet.from_discretization(disc, 1e-10)
    with pytest.raises(NonConvergence):
        semismooth_newton(stage, Un, cs, tol=1e-15, max_iter=1)


class _Arctan:
    """L(U) = arctan(U): undamped Newton from |U0| > 1.39 diverges."""

    def residual(self, U):
        return np.arctan(U)

    def jacobian(self, U):
        import scipy.sparse as sp

        return sp.diags(1.0 / (1.0 + U**2)).tocsr()


def test_line_search_globalizes_newton():
    x0 = np.array([3.0, -5.0, 0.5])
    with pytest.raises((NonConvergence, SingularSystem)), np.errstate(over="ignore"):
        semismooth_newton(_Arctan(), x0, None, tol=1e-14)
    st_ = semismooth_newton(_Arctan(), x0, None, tol=1e-14, line_search=True)
    np.testing.assert_allclose(st_.U, 0.0, atol=1e-14)


def test_lobatto_quadrature_limiter_off_breakdown(tmp_path):
    from kktldg.cli import main

    cfg = tmp_path / "gl.cfg"
    cfg.write_text("preset = porous1d\ndegree = 3\nlimiter = off\nquadrature = gauss_lobatto\n")
    assert main(["run", "--config", str(cfg), "--output", str(tmp_path / "o")]) == 4
    assert (tmp_path / "o" / "FAILED").read_text().startswith("breakdown")


def test_kkt_residual_assembly_by_hand(rng):
    disc = small_disc("porous1d", degree=1, counts=(4,))
    cs = ConstraintSet.from_discretization(disc, 1e-10)
    Un = disc.project(lambda x: 0.5 + 0.3 * np.cos(2 * np.pi * x[..., 0]))
    stage = StageProblem(disc, Un, 0.01, [1.0], 0.0)
    U = Un + 0.01 * rng.standard_normal(disc.N)
    lam = np.abs(rng.standard_normal(cs.m))
    lam[0] = 0.0
    # the left end point of element 0 carries U_0 - U_1; put it at u_min + 0.5
    U[0] = 0.5 + 1e-10 + U[1]
    F = kkt_residual(U, 0.3, lam, stage, cs)
    g = 1e-10 - cs.Phi.toarray() @ U
    r1 = stage.residual(U) + 0.3 * stage.grad_h(U) - cs.Phi.toarray().T @ lam
    np.testing.assert_allclose(F[: disc.N], r1, atol=1e-14)
    assert F[disc.N] == pytest.approx(-stage.h(U), abs=1e-15)
    np.testing.assert_allclose(F[disc.N + 1 :], np.minimum(-g, lam), atol=1e-15)
    assert g[0] == pytest.approx(-0.5)
    assert F[disc.N + 1] == 0.0


def test_multipliers_sit_at_the_minimum():
    # porous1d starts from 0.5 - 0.5 cos(2 pi x), which vanishes at x = 0 and 1
    disc = small_disc("porous1d", degree=2, counts=(20,))
    cs = ConstraintSet.from_discretization(disc, 1e-10)
    U = project_initial(disc, constraints=cs).U
    from kktldg import advance_step, tableau

    _, lam, _ = advance_step(disc, U, 0.0, 0.01, tableau(3), cs)
    x = disc.mesh.map_points(disc.constraint_ref)[..., 0].ravel()
    big = lam > 1e-10
    assert big.any()
    assert np.all(np.minimum(x[big], 1.0 - x[big]) < 0.1)


def test_residual_decreases_near_convergence():
    disc = small_disc("porous1d", degree=2, counts=(10,))
    cs = ConstraintSet.from_discretization(disc, 1e-10)
    Un = project_initial(disc, constraints=cs).U
    stage = StageProblem(disc, Un, 0.02, [1.0], 0.0)
    st_ = semismooth_newton(stage, Un, cs, tol=1e-12, max_iter=40, scale=1.0 / disc.ops.mass)
    tail = st_.history[-3:]
    assert len(tail) == 3 and tail[0] > tail[1] > tail[2]
