import warnings

import numpy as np
import pytest

from drsgt import build_topology, generate_pca_instance


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def small_problem():
    # 4 agents, 200 rows each, n=8, r=3, gap 0.8: cheap desk instance
    return generate_pca_instance(4, 200, 8, 3, 0.8, seed=7)


@pytest.fixture(scope="session")
def ring4():
    return build_topology("ring", 4)


@pytest.fixture(autouse=True)
def _quiet_step_warnings():
    # alpha=1 triggers the step-size advisory; tests opt in explicitly where
    # the warning itself is under test.
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="alpha = ")
        warnings.filterwarnings("ignore", message="t = ")
        yield
