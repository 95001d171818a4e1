# -*- coding: utf-8 -*-
import numpy as np
import pytest
from pydantic import ValidationError

from pipelines.radiative_transfer.models.core import (
    BoundaryData,
    BoundaryMode,
    Face,
    IntensityField,
    KineticState,
    LimitState,
    Params,
    TemperatureField,
    make_grid,
    well_prepared_init,
)


def test_params_validation():
    Params(epsilon=0.1)
    with pytest.raises(ValidationError):
        Params(epsilon=0.0)
    with pytest.raises(ValidationError):
        Params(epsilon=0.1, alpha=1.0)
    with pytest.raises(ValidationError):
        Params(epsilon=0.1, robin_r=-0.5)
    assert Params(epsilon=0.1, bc_mode="robin").bc_mode == BoundaryMode.ROBIN


@pytest.mark.parametrize(
    "args",
    [
        (4, [8], [1.0], [True]),
        (2, [8], [1.0, 1.0], [True, True]),
        (1, [1], [1.0], [True]),
        (1, [8], [0.0], [True]),
    ],
)
def test_make_grid_rejects_bad_axes(args):
    with pytest.raises(ValueError):
        make_grid(*args)


def test_grid_geometry():
    grid = make_grid(2, [4, 8], [2.0, 1.0], [False, False])
    assert grid.shape == (4, 8)
    assert grid.n_cells == 32
    assert grid.spacing == (0.5, 0.125)
    assert grid.cell_volume == pytest.approx(0.0625)
    assert np.allclose(grid.centers(0), [0.25, 0.75, 1.25, 1.75])
    assert grid.points.shape == (4, 8, 3)
    assert np.all(grid.points[..., 2] == 0.0)
    assert [f.name for f in grid.faces] == ["x-", "x+", "y-", "y+"]
    assert grid.face_area(Face(0, -1)) == pytest.approx(0.125)

    high_x = grid.face_points(Face(0, 1))
    assert high_x.shape == (1, 8, 3)
    assert np.all(high_x[..., 0] == 2.0)


def test_torus_grid_has_no_faces():
    grid = make_grid(3, [2, 3, 4], [1.0, 1.0, 1.0], [True, True, True])
    assert grid.is_torus
    assert grid.faces == []


def test_check_mode():
    torus = make_grid(1, [8], [1.0], [True])
    box = make_grid(1, [8], [1.0], [False])
    torus.check_mode(BoundaryMode.TORUS)
    box.check_mode(BoundaryMode.ROBIN)
    with pytest.raises(ValueError):
        torus.check_mode(BoundaryMode.DIRICHLET)
    with pytest.raises(ValueError):
        box.check_mode(BoundaryMode.TORUS)


def test_face_names():
    assert Face.from_name("y+") == Face(1, 1)
    assert Face.from_name(" X- ") == Face(0, -1)
    assert np.array_equal(Face(2, -1).normal, [0.0, 0.0, -1.0])
    for bad in ("w+", "x", "x*"):
        with pytest.raises(ValueError):
            Face.from_name(bad)


def test_fields_validate_shape_and_finiteness(torus_1d):
    with pytest.raises(ValueError):
        TemperatureField(torus_1d, np.ones(31))
    with pytest.raises(ValueError):
        TemperatureField(torus_1d, np.full(32, np.nan))
    with pytest.raises(ValueError):
        IntensityField(torus_1d, np.ones(32))
    with pytest.raises(ValueError):
        IntensityField(torus_1d, np.full((32, 4), np.inf))


def test_states_validate(torus_1d, box_1d):
    T = TemperatureField(torus_1d, np.ones(32))
    with pytest.raises(ValueError):
        KineticState(-1.0, T, IntensityField(torus_1d, np.ones((32, 4))))
    with pytest.raises(ValueError):
        KineticState(0.0, T, IntensityField(box_1d, np.ones((32, 4))))
    with pytest.raises(ValueError):
        LimitState(0.0, TemperatureField(torus_1d, -np.ones(32)))


def test_well_prepared_init(torus_1d, make_sine):
    T0 = make_sine(torus_1d)
    state = well_prepared_init(T0, 16)
    assert state.time == 0.0
    assert state.intensity.values.shape == (32, 16)
    assert np.array_equal(state.intensity.values, np.repeat(T0.values[:, None] ** 4, 16, axis=1))
    assert state.temperature.values is not T0.values


def test_well_prepared_init_rejects_negative(torus_1d):
    with pytest.raises(ValueError):
        well_prepared_init(TemperatureField(torus_1d, np.full(32, -0.1)), 4)


def test_constant_boundary_data(box_1d, quad):
    points = box_1d.face_points(Face(0, -1))
    data = BoundaryData.constant(1.5)
    assert data.well_prepared
    assert np.allclose(data.t_values(0.0, points), 1.5)
    assert np.allclose(data.psi_values(0.0, points, quad.nodes), 1.5**4)
    assert data.psi_values(0.0, points, quad.nodes).shape == (1, quad.n_nodes)
    assert data.check_well_prepared([0.0, 1.0], points, quad.nodes)

    mismatched = BoundaryData.constant(1.0, 2.0)
    assert not mismatched.well_prepared
    assert not mismatched.check_well_prepared([0.0], points, quad.nodes)

    with pytest.raises(ValueError):
        BoundaryData.constant(0.0)


def test_callable_boundary_data_checks_positivity(box_1d):
    data = BoundaryData.from_callable(lambda t, x: 1.0 - t)
    points = box_1d.face_points(Face(0, 1))
    assert np.allclose(data.t_values(0.5, points), 0.5)
    with pytest.raises(ValueError):
        data.t_values(2.0, points)


def test_boundary_data_from_faces(quad):
    grid = make_grid(2, [4, 4], [1.0, 1.0], [False, False])
    values = {"x-": (2.0, None), "x+": (1.0, 3.0), "y-": (1.0, None), "y+": (1.0, None)}
    data = BoundaryData.from_faces(values, grid)
    assert not data.well_prepared
    assert np.allclose(data.t_values(0.0, grid.face_points(Face(0, -1))), 2.0)
    assert np.allclose(data.psi_values(0.0, grid.face_points(Face(0, -1)), quad.nodes), 16.0)
    assert np.allclose(data.psi_values(0.0, grid.face_points(Face(0, 1)), quad.nodes), 3.0)

    with pytest.raises(ValueError, match="y\\+"):
        BoundaryData.from_faces({k: v for k, v in values.items() if k != "y+"}, grid)
