# -*- coding: utf-8 -*-
import numpy as np
import pytest

from pipelines.radiative_transfer.models.core import (
    BoundaryMode,
    ConvergenceError,
    Face,
    Params,
    make_grid,
)
from pipelines.radiative_transfer.models.operators import (
    DIRICHLET_GHOST,
    boundary_source,
    first_derivative,
    ghost_rule,
    ghost_rules,
    hessian,
    interior_mask,
    laplacian_matrix,
    second_derivative,
    solve_quartic_balance,
)


def test_torus_laplacian_matches_second_derivative():
    grid = make_grid(1, [64], [1.0], [True])
    x = grid.centers(0)
    lap = laplacian_matrix(grid, ghost_rules(grid, Params(epsilon=1.0)))
    assert np.allclose(np.asarray(lap.sum(axis=1)).ravel(), 0.0)
    exact = -4.0 * np.pi**2 * np.sin(2.0 * np.pi * x)
    approx = lap @ np.sin(2.0 * np.pi * x)
    assert np.max(np.abs(approx - exact)) / np.max(np.abs(exact)) < 2e-3


@pytest.mark.parametrize("mode", [BoundaryMode.DIRICHLET, BoundaryMode.ROBIN])
def test_box_laplacian_is_symmetric(mode):
    grid = make_grid(2, [6, 5], [1.0, 2.0], [False, False])
    lap = laplacian_matrix(grid, ghost_rules(grid, Params(epsilon=0.3, bc_mode=mode)))
    assert abs(lap - lap.T).max() < 1e-12


def test_dirichlet_ghost_is_exact_for_linear_profiles():
    grid = make_grid(1, [16], [1.0], [False])
    x = grid.centers(0)
    rules = (DIRICHLET_GHOST,)
    faces = {Face(0, -1): np.array([1.0]), Face(0, 1): np.array([2.0])}
    residual = laplacian_matrix(grid, rules) @ (1.0 + x) + boundary_source(grid, rules, faces)
    assert np.allclose(residual, 0.0, atol=1e-8)


def test_robin_ghost_rule():
    grid = make_grid(1, [10], [1.0], [False])
    inner, outer = ghost_rule(grid, Params(epsilon=0.1, robin_r=1.0, bc_mode="robin"), 0)
    # eps^r / dx = 1
    assert inner == pytest.approx(1.0 / 3.0)
    assert outer == pytest.approx(2.0 / 3.0)
    assert ghost_rule(grid, Params(epsilon=0.1, bc_mode="dirichlet"), 0) == DIRICHLET_GHOST
    torus = make_grid(1, [10], [1.0], [True])
    assert ghost_rule(torus, Params(epsilon=0.1), 0) is None


def test_robin_ghost_tends_to_dirichlet_for_small_eps():
    grid = make_grid(1, [10], [1.0], [False])
    inner, outer = ghost_rule(grid, Params(epsilon=1e-3, robin_r=2.0, bc_mode="robin"), 0)
    assert inner == pytest.approx(-1.0, abs=1e-4)
    assert outer == pytest.approx(2.0, abs=1e-4)


def test_derivatives():
    torus = make_grid(1, [128], [1.0], [True])
    x = torus.centers(0)
    slope = first_derivative(np.sin(2 * np.pi * x), torus, 0)
    assert np.max(np.abs(slope - 2 * np.pi * np.cos(2 * np.pi * x))) < 5e-3

    box = make_grid(1, [12], [1.0], [False])
    x = box.centers(0)
    assert np.allclose(first_derivative(x**2, box, 0), 2 * x)
    assert np.allclose(second_derivative(x**3, box, 0), 6 * x)


def test_mixed_hessian():
    grid = make_grid(2, [16, 16], [1.0, 1.0], [False, False])
    points = grid.points
    values = points[..., 0] * points[..., 1]
    hess = hessian(values, grid)
    assert hess.shape == (2, 2, 16, 16)
    assert np.allclose(hess[0, 1], 1.0)
    assert np.allclose(hess[1, 0], 1.0)
    assert np.allclose(hess[0, 0], 0.0, atol=1e-9)


def test_interior_mask():
    mask = interior_mask(make_grid(2, [4, 5], [1.0, 1.0], [False, True]))
    assert not mask[0].any() and not mask[-1].any()
    assert mask[1:-1].all()


def test_quartic_balance_solves_random_cells():
    rng = np.random.default_rng(7)
    b = rng.uniform(0.0, 50.0, size=2000)
    a = rng.uniform(0.0, 200.0, size=2000)
    x, iters, clamped = solve_quartic_balance(b, a)
    assert clamped == 0
    assert np.all(x >= 0)
    assert np.max(np.abs(x + a * x**4 - b) / np.maximum(1.0, b)) < 1e-10
    assert iters.max() <= 50


def test_quartic_balance_edge_cases():
    x, _, clamped = solve_quartic_balance(np.array([-1.0, 0.0, 2.0]), np.array([1.0, 1.0, 0.0]))
    assert clamped == 1
    assert np.allclose(x, [0.0, 0.0, 2.0])

    scalar, iters, _ = solve_quartic_balance(2.0, 1.0)
    assert np.shape(scalar) == ()
    assert float(scalar) == pytest.approx(1.0)


def test_quartic_balance_reports_nonconvergence():
    with pytest.raises(ConvergenceError, match="cell 0"):
        solve_quartic_balance(np.array([1e6]), np.array([1e-6]), max_iter=1)
