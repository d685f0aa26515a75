import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kktldg.mesh import build_mesh


def test_1d_counts_and_faces():
    m = build_mesh(1, (0.0, 2.0), 8, "zero_flux")
    assert m.n_elements == 8
    assert m.h == (0.25,)
    assert m.n_interior_faces == 7 and m.n_boundary_faces == 2
    assert m.jacobian == 0.125


def test_periodic_has_no_boundary_faces():
    m = build_mesh(1, (0.0, 1.0), 5, "periodic")
    assert m.n_interior_faces == 5 and m.n_boundary_faces == 0
    m2 = build_mesh(2, ((0, 1), (0, 2)), (3, 4), "periodic")
    assert m2.n_interior_faces == 2 * 12 and m2.n_boundary_faces == 0


def test_2d_counts_and_faces():
    m = build_mesh(2, ((-1, 1), (0, 3)), (4, 3), "zero_flux")
    assert m.n_elements == 12
    assert np.isclose(m.volume, 6.0)
    assert m.n_interior_faces == 3 * 3 + 4 * 2
    assert m.n_boundary_faces == 2 * 3 + 2 * 4
    assert m.element_index(1, 2) == 9


def test_face_neighbours_are_adjacent():
    m = build_mesh(2, ((0, 1), (0, 1)), (3, 2), "zero_flux")
    c = m.element_corners()
    for axis, f in enumerate(m.faces):
        d = c[f.right] - c[f.left]
        np.testing.assert_allclose(d[:, axis], m.h[axis])
        np.testing.assert_allclose(d[:, 1 - axis], 0.0)


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=20), st.integers(1, 12))
def test_locate_inverts_map_points(xs, n):
    m = build_mesh(1, (-2.0, 3.0), n)
    x = -2.0 + 5.0 * np.array(xs)[:, None]
    e, ref = m.locate(x)
    assert np.all(np.abs(ref) <= 1 + 1e-12)
    back = np.array([m.map_points(ref[i : i + 1])[e[i], 0] for i in range(len(x))])
    np.testing.assert_allclose(back, x, atol=1e-12)


@pytest.mark.parametrize(
    "args",
    [
        (3, (0, 1), 4),
        (1, (1, 0), 4),
        (1, (0, 1), 0),
        (2, ((0, 1), (0, 1)), (2,)),
        (1, (0, 1), 4, "mirror"),
    ],
)
def test_invalid_meshes_raise(args):
    with pytest.raises(ValueError):
        build_mesh(*args)
