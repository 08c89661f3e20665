import numpy as np
import pytest

from mixdenoise import fixtures


@pytest.fixture(scope="session")
def suite128():
    return fixtures.suite(128)


@pytest.fixture(scope="session")
def suite256():
    return fixtures.suite(256)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
