import pytest

from bdnets.construction import Construction
from bdnets.system import build_system

P0 = {"stages": [1, 2, 3], "extension": "zero", "lambda_bar": 2, "n_max": 3}
AFFINE = {"stages": [1, 2, 3], "extension": "affine", "lambda_bar": 2, "n_max": 3}


@pytest.fixture(scope="session")
def p0_system():
    return build_system(P0)


@pytest.fixture(scope="session")
def affine_system():
    return build_system(AFFINE)


@pytest.fixture(scope="session")
def p0(p0_system):
    return Construction(p0_system, stage=2)


@pytest.fixture(scope="session")
def affine(affine_system):
    return Construction(affine_system, stage=2)
