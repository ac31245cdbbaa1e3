import numpy as np
import pytest

from kpztail.grids import Potential, SpaceGrid, SpaceTimeDeviation, TimeGrid


@pytest.fixture(scope="session")
def grid20():
    # L = 20, dx = 0.01
    return SpaceGrid(20.0, 4001)


@pytest.fixture(scope="session")
def grid10():
    # L = 10, dx = 0.05
    return SpaceGrid(10.0, 401)


@pytest.fixture(scope="session")
def sech2_20(grid20):
    return Potential(grid20, 1.0 / np.cosh(grid20.x) ** 2)


def zero_deviation(tgrid: TimeGrid, sgrid: SpaceGrid) -> SpaceTimeDeviation:
    return SpaceTimeDeviation(tgrid, sgrid, np.zeros((tgrid.n_steps + 1, sgrid.n_points)))
