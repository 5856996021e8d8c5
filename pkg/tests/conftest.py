import warnings

import numpy as np
import pytest

from qprob.errors import CFLWarning
from qprob.grid import Boundary, Grid1D


@pytest.fixture(scope="session")
def grid():
    """Default verification grid."""
    return Grid1D(-20.0, 20.0, 2001, Boundary.VANISHING)


@pytest.fixture(scope="session")
def periodic_grid():
    return Grid1D(0.0, 2.0 * np.pi, 256, Boundary.PERIODIC)


@pytest.fixture
def quiet_cfl():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CFLWarning)
        yield
