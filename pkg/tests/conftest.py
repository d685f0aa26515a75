import numpy as np
import pytest

from kktldg import LDGDiscretization, build_mesh, preset

ACCEPTANCE_LINES = []


def small_disc(name="porous1d", counts=None, degree=1, **kw):
    spec = preset(name).problem
    if counts is None:
        counts = (4,) if spec.dim == 1 else (2, 2)
    mesh = build_mesh(spec.dim, spec.bounds, counts, kw.pop("boundary", spec.boundary))
    return LDGDiscretization(mesh, spec, degree, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
