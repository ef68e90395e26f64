import numpy as np
import pytest

from dtncert.geometry import SurfaceSpec, build_surface, quadrature_grid


@pytest.fixture(scope="session")
def unit_sphere():
    return build_surface(SurfaceSpec("sphere", 1.0))


@pytest.fixture(scope="session")
def sphere_grid(unit_sphere):
    return quadrature_grid(unit_sphere, 24, 48)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
