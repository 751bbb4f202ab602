import numpy as np
import pytest

from qsopt.ledger import QueryLedger
from qsopt.mean_estimation import finite_source
from qsopt.rng import Rng

PLUS_MINUS_E = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


@pytest.fixture
def rng():
    return Rng(1234, 0)


@pytest.fixture
def ledger():
    return QueryLedger()


@pytest.fixture
def pm_source():
    return finite_source(PLUS_MINUS_E)
