import numpy as np
import pytest

from vvs_solver.fields import ClosureTable, Grid, ProblemSpec, ScalarField, VectorField
from vvs_solver.operators import clamped_space


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit_grid():
    return Grid(17, 17)


@pytest.fixture
def random_clamped(rng):
    def make(grid):
        prolong, free = clamped_space(grid)
        return ScalarField(grid, (prolong @ rng.standard_normal(free.size)).reshape(grid.shape))

    return make


def lid_problem(n=13, lid=1.0, eta=None, b=None, C0=0.0, **options):
    grid = Grid(n, n)
    i, j = grid.boundary_indices()
    u0 = np.zeros((i.size, 2))
    u0[j == grid.ny - 1, 0] = lid
    return ProblemSpec(
        grid=grid,
        u0=u0,
        force=VectorField.zeros(grid),
        eta=eta or ClosureTable((-0.1, 0.0), (2.0, 1.0)),
        b=b or ClosureTable((1.0, 2.0), (1.0, 1.5)),
        C0=C0,
        name="lid",
        **options,
    )


@pytest.fixture
def lid_cavity():
    return lid_problem
