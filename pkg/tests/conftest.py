from fractions import Fraction
from pathlib import Path

import pytest

from markovline import (
    StateVector,
    build_finite_modification,
    build_quasi_lift,
    build_random_walk_map,
    make_kernel,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="session")
def config_dir() -> Path:
    return CONFIG_DIR


@pytest.fixture(scope="session")
def fiveband_kernel():
    return make_kernel(
        2,
        ["1/9", "2/9", "3/9", "2/9", "1/9"],
        {
            -1: ["1/9", "2/9", "5/9", "1/9", "0"],
            0: ["1/9", "1/9", "5/9", "1/9", "1/9"],
            1: ["0", "1/9", "5/9", "2/9", "1/9"],
        },
    )


@pytest.fixture(scope="session")
def fiveband_map(fiveband_kernel):
    return build_random_walk_map(fiveband_kernel)


@pytest.fixture(scope="session")
def ssrw_kernel():
    return make_kernel(1, ["1/2", "0", "1/2"])


@pytest.fixture(scope="session")
def ssrw_map(ssrw_kernel):
    return build_random_walk_map(ssrw_kernel)


@pytest.fixture(scope="session")
def drift_kernel():
    return make_kernel(2, ["0", "0", "1/5", "2/5", "2/5"])


@pytest.fixture(scope="session")
def doubling_map():
    return build_quasi_lift(1, [(0, "1/2", 0), (-1, "1/2", "-1/2")])


@pytest.fixture(scope="session")
def nonlinear_ql():
    return build_quasi_lift(1, [(0, "1/2", 0, 0.02), (-1, "1/2", "-1/2", -0.02)])


@pytest.fixture(scope="session")
def finite_mod(doubling_map):
    return build_finite_modification(
        doubling_map, {0: Fraction(1, 128), -1: Fraction(-1, 128)}
    )


@pytest.fixture()
def delta0():
    return StateVector.point_mass(0)
