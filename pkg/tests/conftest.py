import numpy as np
import pytest

import rapwalk as rw


@pytest.fixture(scope="session")
def two_point_uniform():
    return rw.TwoPointBeta(2, 1)


@pytest.fixture(scope="session")
def two_point_constants(two_point_uniform):
    return rw.constants_for(two_point_uniform)


@pytest.fixture(scope="session")
def law_zoo():
    """One representative of each variant, all satisfying the standing
    assumptions."""
    return [
        rw.TwoPointBeta(2, 1),
        rw.TwoPointBeta(5, 2),
        rw.Deterministic((0.5, 0.5, 0.0)),
        rw.DirichletWindow((1.0, 1.0, 1.0)),
        rw.DirichletWindow((2.0, 0.5, 1.0, 0.5, 2.0)),
        rw.FiniteMixture(((0.3, (0.6, 0.4, 0.0)), (0.7, (0.1, 0.5, 0.4)))),
    ]


@pytest.fixture()
def rng():
    return np.random.default_rng(20260810)
