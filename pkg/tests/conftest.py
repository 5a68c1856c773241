import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kohnlap import catalog
from kohnlap.functions import FunctionRep
from kohnlap.spectral import assemble, solve_spectrum

settings.register_profile(
    "numeric",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("numeric")


@pytest.fixture(scope="session")
def s3():
    """S^3 with a (2, 2) basis on the exact rule."""
    return catalog.sphere(1).setup(2, 2)


@pytest.fixture(scope="session")
def s3_spectrum(s3):
    st, basis = s3
    mats = assemble(st, basis)
    return solve_spectrum(mats), mats


@pytest.fixture(scope="session")
def s3_deformable():
    """S^3 with a (2, 2) basis on a rule with headroom for conformal factors."""
    return catalog.deformed_sphere(1, FunctionRep.constant(2, 0.0)).setup(2, 2)


@pytest.fixture(scope="session")
def reinhardt1():
    return catalog.reinhardt(1, 1.0).setup(1, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def sphere_points(n, count, rng):
    z = rng.standard_normal((count, n + 1)) + 1j * rng.standard_normal((count, n + 1))
    return z / np.linalg.norm(z, axis=1, keepdims=True)
