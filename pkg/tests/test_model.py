import math

import numpy as np
from scipy.integrate import trapezoid
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kktldg.model import (
    PRESET_NAMES,
    InadmissibleStateError,
    eval_entropy_density,
    generic_source,
    manufactured_source,
    polynomial_problem,
    preset,
)


def _sample_states(spec, n=25):
    if spec.name == "fermion2d":
        return np.linspace(0.02, 0.98, n)
    return np.linspace(0.05, 3.0, n)


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_entropy_derivatives_consistent(name):
    spec = preset(name).problem
    u = _sample_states(spec)
    e = 1e-6
    np.testing.assert_allclose((spec.H(u + e) - spec.H(u - e)) / (2 * e), spec.dH(u), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose((spec.dH(u + e) - spec.dH(u - e)) / (2 * e), spec.d2H(u), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose((spec.d2H(u + e) - spec.d2H(u - e)) / (2 * e), spec.d3H(u), rtol=1e-5, atol=1e-6)
    np.testing.assert_allclose((spec.f(u + e) - spec.f(u - e)) / (2 * e), spec.df(u), rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_diffusion_coefficient_nonnegative(name):
    spec = preset(name).problem
    u = _sample_states(spec)
    assert np.all(spec.f(u) * spec.d2H(u) >= 0)


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_entropy_density_vanishes_at_zero(name):
    spec = preset(name).problem
    assert abs(float(spec.H(np.array(0.0)))) < 1e-14 or spec.state_domain is not None


def test_boson_parameters():
    for m in (1.0, 10.0):
        p = preset("boson1d", m)
        assert p.problem.params["mass"] == m
        xs = np.linspace(-10, 10, 4001)[:, None]
        total = trapezoid(p.problem.initial(xs), xs[:, 0])
        assert math.isclose(total, m, rel_tol=1e-6)
    assert preset("boson1d", 1.0).final_time == 10.0
    assert preset("boson1d", 10.0).final_time == 1.0


def test_accuracy_source_matches_chain_rule():
    spec = preset("accuracy1d").problem
    x = np.linspace(-0.99, 0.99, 41)[:, None]
    for t in (0.0, 0.3, 1.0):
        np.testing.assert_allclose(manufactured_source(spec, x, t), generic_source(spec, x, t), atol=1e-10)


def test_accuracy_exact_derivatives():
    ex = preset("accuracy1d").problem.exact
    x = np.linspace(-0.9, 0.9, 13)[:, None]
    e = 1e-5
    np.testing.assert_allclose((ex.value(x + e, 0.2) - ex.value(x - e, 0.2)) / (2 * e), ex.grad(x, 0.2)[..., 0], atol=1e-7)
    np.testing.assert_allclose(
        (ex.grad(x + e, 0.2) - ex.grad(x - e, 0.2))[..., 0] / (2 * e), ex.laplacian(x, 0.2), atol=1e-6
    )
    np.testing.assert_allclose((ex.value(x, 0.2 + e) - ex.value(x, 0.2 - e)) / (2 * e), ex.dt(x, 0.2), atol=1e-8)


def test_potential_gradients():
    for name in ("doublewell1d", "fermion2d"):
        spec = preset(name).problem
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, (10, spec.dim))
        e = 1e-6
        for a in range(spec.dim):
            d = np.zeros(spec.dim)
            d[a] = e
            fd = (spec.phi(x + d) - spec.phi(x - d)) / (2 * e)
            np.testing.assert_allclose(fd, spec.potential.grad(x)[..., a], atol=1e-8)


@given(st.lists(st.floats(-2.0, 2.0), min_size=1, max_size=10))
def test_clip_to_domain_stays_inside(vals):
    spec = preset("fermion2d").problem
    u = np.array(vals)
    c, inside = spec.clip_to_domain(u, 1e-10)
    assert np.all(spec.admissible(c))
    np.testing.assert_array_equal(c[inside], u[inside])


def test_entropy_density_rejects_inadmissible():
    spec = preset("fermion2d").problem
    with pytest.raises(InadmissibleStateError):
        eval_entropy_density(spec, np.array([0.5, 1.2]), np.zeros((2, 2)))


def test_polynomial_problem():
    base = preset("porous1d").problem
    spec = polynomial_problem(base, [1.0], [0.0, 1.0])
    u = np.linspace(0, 1, 5)
    np.testing.assert_allclose(spec.f(u), 1.0)
    np.testing.assert_allclose(spec.H(u), 0.5 * u**2)
    np.testing.assert_allclose(spec.d2H(u), 1.0)


def test_unknown_preset():
    with pytest.raises(ValueError):
        preset("nope")
