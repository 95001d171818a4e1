# -*- coding: utf-8 -*-
"""
Spatial operators shared by the kinetic solver, the limit solver and the
diagnostics: the ghost-cell Laplacian, finite-difference derivatives and the
scalar quartic balance solve.
"""
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp

from pipelines.radiative_transfer.models.core import (
    BoundaryData,
    BoundaryMode,
    ConvergenceError,
    Face,
    Params,
    SpatialGrid,
    boundary_slab,
)

# Ghost rule on a non-periodic face: ghost = inner * T_adjacent + outer * Tb
GhostRule = Tuple[float, float]
DIRICHLET_GHOST: GhostRule = (-1.0, 2.0)


def ghost_rule(grid: SpatialGrid, params: Params, axis: int) -> Optional[GhostRule]:
    """
    Ghost coefficients for `axis`, or None on a periodic axis.

    Robin uses the face-centered flux relation
    eps^r (T_ghost - T_in) / dx = Tb - (T_ghost + T_in) / 2.
    """
    if grid.periodic_per_axis[axis]:
        return None
    if params.bc_mode == BoundaryMode.ROBIN:
        rho = params.epsilon**params.robin_r / grid.spacing[axis]
        return ((rho - 0.5) / (rho + 0.5), 1.0 / (rho + 0.5))
    return DIRICHLET_GHOST


def ghost_rules(grid: SpatialGrid, params: Params) -> Tuple[Optional[GhostRule], ...]:
    return tuple(ghost_rule(grid, params, axis) for axis in range(grid.dim))


def dirichlet_rules(grid: SpatialGrid) -> Tuple[Optional[GhostRule], ...]:
    return tuple(
        None if grid.periodic_per_axis[axis] else DIRICHLET_GHOST for axis in range(grid.dim)
    )


def _second_difference_1d(n: int, dx: float, rule: Optional[GhostRule]) -> sp.csr_matrix:
    idx = np.arange(n)
    rows = [idx, idx[1:], idx[:-1]]
    cols = [idx, idx[:-1], idx[1:]]
    vals = [np.full(n, -2.0), np.ones(n - 1), np.ones(n - 1)]
    if rule is None:
        # wrap entries; duplicates are summed so n == 2 stays consistent
        rows += [np.array([0, n - 1])]
        cols += [np.array([n - 1, 0])]
        vals += [np.ones(2)]
    else:
        rows += [np.array([0, n - 1])]
        cols += [np.array([0, n - 1])]
        vals += [np.full(2, rule[0])]
    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return (matrix / dx**2).tocsr()


@lru_cache(maxsize=64)
def laplacian_matrix(grid: SpatialGrid, rules: Tuple[Optional[GhostRule], ...]) -> sp.csr_matrix:
    """
    Sparse (2 dim + 1)-point Laplacian on the flattened (C order) grid, with the
    homogeneous part of the ghost rules folded into the boundary diagonal.
    """
    blocks = [
        _second_difference_1d(n, dx, rule)
        for n, dx, rule in zip(grid.cells_per_axis, grid.spacing, rules)
    ]
    total = sp.csr_matrix((grid.n_cells, grid.n_cells))
    for axis, block in enumerate(blocks):
        left = sp.identity(int(np.prod(grid.shape[:axis], dtype=int)), format="csr")
        right = sp.identity(int(np.prod(grid.shape[axis + 1 :], dtype=int)), format="csr")
        total = total + sp.kron(sp.kron(left, block), right, format="csr")
    total.sum_duplicates()
    return total


def boundary_source(
    grid: SpatialGrid,
    rules: Tuple[Optional[GhostRule], ...],
    face_values: dict,
) -> np.ndarray:
    """
    Inhomogeneous part of the ghost rules: outer * Tb / dx^2 on each boundary layer.

    Args:
        face_values (dict): Maps each non-periodic `Face` to its boundary values,
            shaped like the face slab.
    """
    source = np.zeros(grid.shape)
    for face in grid.faces:
        rule = rules[face.axis]
        index = [slice(None)] * grid.dim
        index[face.axis] = slice(0, 1) if face.side < 0 else slice(-1, None)
        source[tuple(index)] += rule[1] * face_values[face] / grid.spacing[face.axis] ** 2
    return source


def boundary_temperatures(grid: SpatialGrid, boundary_data: BoundaryData, t: float) -> dict:
    return {face: boundary_data.t_values(t, grid.face_points(face)) for face in grid.faces}


def face_temperature(
    values: np.ndarray, face: Face, rule: GhostRule, tb: np.ndarray
) -> np.ndarray:
    """Face value (T_ghost + T_in) / 2 implied by the ghost rule."""
    inner = boundary_slab(values, face)
    return 0.5 * ((rule[0] + 1.0) * inner + rule[1] * tb)


def interior_mask(grid: SpatialGrid) -> np.ndarray:
    """Cells away from the one-cell ring along non-periodic axes."""
    mask = np.ones(grid.shape, dtype=bool)
    for axis in range(grid.dim):
        if not grid.periodic_per_axis[axis]:
            index = [slice(None)] * grid.dim
            index[axis] = [0, -1]
            mask[tuple(index)] = False
    return mask


def first_derivative(values: np.ndarray, grid: SpatialGrid, axis: int) -> np.ndarray:
    """Second-order central difference along `axis` (one-sided second order at walls)."""
    h = grid.spacing[axis]
    if grid.periodic_per_axis[axis]:
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * h)
    return np.gradient(values, h, axis=axis, edge_order=2 if values.shape[axis] > 2 else 1)


def second_derivative(values: np.ndarray, grid: SpatialGrid, axis: int) -> np.ndarray:
    """Three-point second difference; four-point one-sided formula on wall cells."""
    h2 = grid.spacing[axis] ** 2
    if grid.periodic_per_axis[axis]:
        return (
            np.roll(values, -1, axis=axis) - 2.0 * values + np.roll(values, 1, axis=axis)
        ) / h2
    out = np.empty_like(values)
    moved = np.moveaxis(values, axis, 0)
    target = np.moveaxis(out, axis, 0)
    target[1:-1] = (moved[2:] - 2.0 * moved[1:-1] + moved[:-2]) / h2
    if moved.shape[0] >= 4:
        target[0] = (2.0 * moved[0] - 5.0 * moved[1] + 4.0 * moved[2] - moved[3]) / h2
        target[-1] = (2.0 * moved[-1] - 5.0 * moved[-2] + 4.0 * moved[-3] - moved[-4]) / h2
    else:
        target[0] = target[1] if moved.shape[0] > 2 else 0.0
        target[-1] = target[-2] if moved.shape[0] > 2 else 0.0
    return out


def gradient(values: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Stack of first derivatives, shape (dim,) + values.shape."""
    return np.stack([first_derivative(values, grid, a) for a in range(grid.dim)])


def hessian(values: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Stack of second derivatives, shape (dim, dim) + values.shape."""
    grad = gradient(values, grid)
    out = np.empty((grid.dim, grid.dim) + values.shape)
    for a in range(grid.dim):
        out[a, a] = second_derivative(values, grid, a)
        for b in range(a + 1, grid.dim):
            out[a, b] = out[b, a] = first_derivative(grad[a], grid, b)
    return out


def directional_derivative(values: np.ndarray, grid: SpatialGrid, nodes: np.ndarray) -> np.ndarray:
    """beta . grad(values) for every node; output shape values.shape + (Q,)."""
    grad = gradient(values, grid)
    return np.einsum("a...,qa->...q", grad, nodes[:, : grid.dim])


def second_directional_derivative(
    values: np.ndarray, grid: SpatialGrid, nodes: np.ndarray
) -> np.ndarray:
    """beta . grad(beta . grad(values)) for every node; output shape values.shape + (Q,)."""
    hess = hessian(values, grid)
    beta = nodes[:, : grid.dim]
    return np.einsum("ab...,qa,qb->...q", hess, beta, beta)


def directional_derivative_per_node(
    values: np.ndarray, grid: SpatialGrid, nodes: np.ndarray
) -> np.ndarray:
    """beta_q . grad(values[..., q]) for an intensity-shaped array."""
    grads = np.stack(
        [first_derivative(values, grid, a) for a in range(grid.dim)], axis=0
    )
    return np.einsum("a...q,qa->...q", grads, nodes[:, : grid.dim])


def solve_quartic_balance(
    b: np.ndarray,
    a: np.ndarray,
    start: Optional[np.ndarray] = None,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Solves x + a x^4 = b elementwise for x >= 0 with Newton safeguarded by bisection.

    Newton starts from an upper bound of the root, where x + a x^4 is convex and
    increasing, and stops when |dx| <= tol * max(1, x). Entries with b <= 0 return 0.

    Args:
        b (np.ndarray): Right-hand sides.
        a (np.ndarray): Nonnegative quartic coefficients, broadcastable to `b`.
        start (np.ndarray, optional): Initial guesses, used where they bound the root above.
        tol (float): Relative step tolerance.
        max_iter (int): Newton iteration cap.

    Returns:
        Tuple[np.ndarray, np.ndarray, int]: the roots, the iteration count per entry
        and the number of entries with b < 0 that were clamped to zero.

    Raises:
        ConvergenceError: if some entry needs more than `max_iter` iterations; the
            message names the first such flat index.
    """
    b = np.asarray(b, dtype=float)
    shape = b.shape
    b = np.atleast_1d(b)
    a = np.broadcast_to(np.asarray(a, dtype=float), b.shape)
    negative = b < 0
    positive = b > 0

    x = np.zeros_like(b)
    iters = np.zeros(b.shape, dtype=int)
    with np.errstate(divide="ignore", invalid="ignore"):
        upper = np.where(a > 0, np.minimum(b, np.abs(b / np.where(a > 0, a, 1.0)) ** 0.25), b)
    upper = np.where(positive, upper, 0.0)
    if start is not None:
        start = np.asarray(start, dtype=float)
        use_start = (start >= 0) & (start + a * start**4 >= b) & (start < upper)
        upper = np.where(use_start, start, upper)

    x[positive] = upper[positive]
    lo = np.zeros_like(b)
    hi = upper.copy()
    active = positive.copy()
    for _ in range(max_iter):
        if not active.any():
            break
        xa = x[active]
        aa = a[active]
        g = xa + aa * xa**4 - b[active]
        dg = 1.0 + 4.0 * aa * xa**3
        # maintain the bracket [lo, hi] around the root
        lo_a = np.where(g < 0, xa, lo[active])
        hi_a = np.where(g > 0, xa, hi[active])
        step = g / dg
        candidate = xa - step
        outside = (candidate < lo_a) | (candidate > hi_a)
        candidate = np.where(outside, 0.5 * (lo_a + hi_a), candidate)
        done = np.abs(candidate - xa) <= tol * np.maximum(1.0, np.abs(candidate))

        x[active] = candidate
        lo[active] = lo_a
        hi[active] = hi_a
        iters[active] += 1
        still = active.copy()
        still[active] = ~done
        active = still

    if active.any():
        first = int(np.flatnonzero(active.ravel())[0])
        raise ConvergenceError(
            f"quartic balance did not converge in {max_iter} iterations at cell {first} "
            f"(b={b.ravel()[first]!r})"
        )
    return x.reshape(shape), iters.reshape(shape), int(negative.sum())
