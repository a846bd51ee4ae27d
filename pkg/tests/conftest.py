"""Shared fixtures: canonical metrics and operators built once per session.

The dense eigendecompositions dominate the suite's runtime, so every sign
operator that more than one module needs lives here as a session fixture.
"""

import numpy as np
import pytest

from confspec import (
    SpinStructure,
    build_dirac,
    make_circle_metric,
    make_torus_metric,
    sign_of,
)

N_CIRCLE = 64
N_TORUS = 32


def circle_theta(n: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n) / n


@pytest.fixture(scope="session")
def antiperiodic():
    return SpinStructure(("antiperiodic",))


@pytest.fixture(scope="session")
def periodic():
    return SpinStructure(("periodic",))


@pytest.fixture(scope="session")
def periodic_2d():
    return SpinStructure(("periodic", "periodic"))


@pytest.fixture(scope="session")
def flat_circle():
    return make_circle_metric(2.0 * np.pi, np.zeros(N_CIRCLE), 0)


@pytest.fixture(scope="session")
def curved_circle():
    theta = circle_theta(N_CIRCLE)
    return make_circle_metric(2.0 * np.pi, 0.3 * np.sin(theta), 1)


@pytest.fixture(scope="session")
def dirac_flat_s1(flat_circle, antiperiodic):
    return build_dirac(flat_circle, antiperiodic)


@pytest.fixture(scope="session")
def dirac_curved_s1(curved_circle, antiperiodic):
    return build_dirac(curved_circle, antiperiodic)


@pytest.fixture(scope="session")
def sign_flat_s1(dirac_flat_s1):
    return sign_of(dirac_flat_s1)


@pytest.fixture(scope="session")
def sign_curved_s1(dirac_curved_s1):
    return sign_of(dirac_curved_s1)


@pytest.fixture(scope="session")
def torus_c1():
    return make_torus_metric(1.0, np.zeros((N_TORUS, N_TORUS)), 0)


@pytest.fixture(scope="session")
def torus_c2():
    return make_torus_metric(2.0, np.zeros((N_TORUS, N_TORUS)), 0)


@pytest.fixture(scope="session")
def dirac_t2_c1(torus_c1, periodic_2d):
    return build_dirac(torus_c1, periodic_2d)


@pytest.fixture(scope="session")
def dirac_t2_c2(torus_c2, periodic_2d):
    return build_dirac(torus_c2, periodic_2d)


@pytest.fixture(scope="session")
def sign_t2_c1(dirac_t2_c1):
    return sign_of(dirac_t2_c1)


@pytest.fixture(scope="session")
def sign_t2_c2(dirac_t2_c2):
    return sign_of(dirac_t2_c2)


@pytest.fixture(scope="session")
def dirac_flat_s1_128(antiperiodic):
    metric = make_circle_metric(2.0 * np.pi, np.zeros(128), 0)
    return build_dirac(metric, antiperiodic)


@pytest.fixture(scope="session")
def dirac_curved_s1_128(antiperiodic):
    theta = circle_theta(128)
    metric = make_circle_metric(2.0 * np.pi, 0.3 * np.sin(theta), 1)
    return build_dirac(metric, antiperiodic)


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)
