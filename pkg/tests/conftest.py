import logging

import numpy as np
import pytest

from copolymer import entropy, registry
from copolymer.config import model_params
from copolymer.interface import InterfaceTable, mu_grid
from copolymer.varform import SlopeMeasure, VariationalSolver


@pytest.fixture(autouse=True)
def clean_state():
    """Forget registered tables and undo CLI logging set-up after each test."""
    yield
    registry.drop_all()
    logger = logging.getLogger("copolymer")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.setLevel(logging.NOTSET)
    logger.propagate = True


@pytest.fixture
def params():
    return model_params(alpha=2.0, beta=1.0, p=0.5)


@pytest.fixture
def entropic_table(params):
    return InterfaceTable.entropic(params)


@pytest.fixture
def solver(params, entropic_table):
    return VariationalSolver(params, entropic_table)


def bumped_table(params, bump=0.05, mu_max=8.0, mu_step=0.1):
    """A table with φ_I strictly above the entropic floor away from μ = 1."""
    grid = mu_grid(mu_max, mu_step)
    estimates = [entropy.kappa(mu, 0.0) + bump * (1.0 - 1.0 / mu) for mu in grid]
    return InterfaceTable(params, grid, estimates, np.full(len(grid), 1e-4), samples=100, seed=0)


@pytest.fixture
def synthetic_table(params):
    return bumped_table(params)


@pytest.fixture
def a_only_family():
    """A family of A-only measures with positive slopes plus one B-charging member."""
    return [
        SlopeMeasure([(0.5, 0.5), (2.0, 0.5)], label="a-steep"),
        SlopeMeasure([(1.0, 1.0)], label="a-one"),
        SlopeMeasure([(0.0, 0.25)], [(0.0, 0.25)], 0.5, label="mixed"),
    ]


@pytest.fixture
def localizing_table(params):
    """A table whose interface gain dominates every delocalized strategy."""
    return bumped_table(params, bump=1.0)
