import math

import pytest

from heatctl import DomainSpec, ObservabilitySet, build_basis, galerkin_schrodinger


@pytest.fixture
def half_interval_set():
    """S = (0, pi/2) as a periodic box set with cell pi."""
    return ObservabilitySet.periodic((math.pi,), [((0.0, math.pi / 2),)])


@pytest.fixture
def dirichlet_op():
    """-Laplace on (0, pi) with Dirichlet walls, modes up to E = 100."""
    basis = build_basis(DomainSpec.interval(0.0, math.pi, "dirichlet"), 100.0)
    return galerkin_schrodinger(basis)
