"""Shared fixtures: small meshes and operators reused across test modules."""

import numpy as np
import pytest
import scipy.sparse as sp

from cmmodes.mesh import TriangleMesh, generate_lshape, generate_sphere
from cmmodes.operators import LaplaceOperator, build_laplacian


@pytest.fixture(scope="session")
def single_equilateral():
    """One equilateral triangle with unit side length."""
    return TriangleMesh(
        vertices=np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, np.sqrt(3) / 2, 0.0]]),
        faces=np.array([[0, 1, 2]]),
    )


@pytest.fixture(scope="session")
def single_right_isoceles():
    """Right triangle with unit legs along the axes."""
    return TriangleMesh(
        vertices=np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
        faces=np.array([[0, 1, 2]]),
    )


@pytest.fixture(scope="session")
def lshape_small():
    return generate_lshape(2)


@pytest.fixture(scope="session")
def lshape8():
    return generate_lshape(8)


@pytest.fixture(scope="session")
def sphere1():
    return generate_sphere(1)


@pytest.fixture(scope="session")
def lshape8_lumped(lshape8):
    return build_laplacian(lshape8, "lumped")


@pytest.fixture(scope="session")
def lshape8_unlumped(lshape8):
    return build_laplacian(lshape8, "unlumped")


@pytest.fixture(scope="session")
def sphere1_lumped(sphere1):
    return build_laplacian(sphere1, "lumped")


def scalar_operator(w: float, a: float = 1.0) -> LaplaceOperator:
    """1x1 operator from raw weight/mass scalars, for toy-problem tests."""
    return LaplaceOperator(
        weight=sp.csr_array(np.array([[w]])),
        mass=sp.csr_array(np.array([[a]])),
        mass_kind="lumped",
    )
