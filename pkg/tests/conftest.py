import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lowmem_sn.assembly import ProblemSpec
from lowmem_sn.krylov import SolverConfig
from lowmem_sn.mesh import build_mesh
from lowmem_sn.quadrature import gauss_legendre_slab, product_sphere_disk

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("default")

TIGHT = SolverConfig(tol=1e-13, restart=None)

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def tight():
    return TIGHT


@pytest.fixture
def slab_problem():
    """Piecewise cross sections, angle-dependent source and inflow on [0, 1]."""
    src = lambda om, x: 1 + np.sin(3 * x[..., 0]) + om[0] * np.cos(x[..., 0])
    inflow = lambda om, x: 0.5 + om[0]
    sig = lambda x: np.where(x[..., 0] < 0.5, 1.0, 3.0)
    return ProblemSpec(0.3, sig, 0.7, src, inflow)


@pytest.fixture
def small_1d():
    return build_mesh((0.0, 1.0), 8), gauss_legendre_slab(4)


@pytest.fixture
def small_2d():
    return build_mesh(((0.0, 1.0), (0.0, 2.0)), (4, 3)), product_sphere_disk(2, 4)
