# -*- coding: utf-8 -*-
from pathlib import Path

import numpy as np
import pytest

from pipelines.radiative_transfer.models.core import (
    BoundaryData,
    BoundaryMode,
    Params,
    TemperatureField,
    make_grid,
    well_prepared_init,
)
from pipelines.radiative_transfer.models.quadrature import build_quadrature

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def config_dir() -> Path:
    return CONFIG_DIR


@pytest.fixture
def quad():
    return build_quadrature(4, 8)


@pytest.fixture
def torus_1d():
    return make_grid(1, [32], [1.0], [True])


@pytest.fixture
def box_1d():
    return make_grid(1, [32], [1.0], [False])


@pytest.fixture
def torus_params():
    return Params(epsilon=0.2, bc_mode=BoundaryMode.TORUS)


@pytest.fixture
def dirichlet_params():
    return Params(epsilon=0.2, bc_mode=BoundaryMode.DIRICHLET)


@pytest.fixture
def unit_boundary():
    return BoundaryData.constant(1.0)


def sine_temperature(grid, c0: float = 1.0, amp: float = 0.3) -> TemperatureField:
    x = grid.centers(0)
    return TemperatureField(grid, c0 + amp * np.sin(2.0 * np.pi * x))


@pytest.fixture
def smooth_state(torus_1d, quad):
    return well_prepared_init(sine_temperature(torus_1d), quad.n_nodes)


@pytest.fixture
def make_sine():
    return sine_temperature
