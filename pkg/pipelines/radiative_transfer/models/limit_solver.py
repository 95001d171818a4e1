# -*- coding: utf-8 -*-
"""
Backward-Euler integration of the nonlinear diffusion limit
d_t (T + 4pi T^4) = Laplacian(T + 4pi/3 T^4), solved in the conserved variable u.
"""
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from prefeitura_rio.pipelines_utils.logging import log, log_mod
from pydantic import BaseModel, ConfigDict, Field
from scipy.sparse.linalg import LinearOperator, gmres

from pipelines.constants import constants
from pipelines.radiative_transfer.models.core import (
    BoundaryData,
    BoundaryMode,
    ConvergenceError,
    LimitState,
    Params,
    SpatialGrid,
    TemperatureField,
)
from pipelines.radiative_transfer.models.operators import (
    boundary_source,
    boundary_temperatures,
    dirichlet_rules,
    laplacian_matrix,
    solve_quartic_balance,
)

FOUR_PI = 4.0 * np.pi


class LimitSolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    newton_tol: float = Field(default=constants.LIMIT_NEWTON_TOL.value, gt=0)
    newton_max_iter: int = Field(default=constants.LIMIT_NEWTON_MAX_ITER.value, ge=1)
    linear_tol: float = Field(default=1e-10, gt=0)
    fixed_point_max_iter: int = Field(default=constants.LIMIT_FIXED_POINT_MAX_ITER.value, ge=1)
    damping: float = Field(default=1.0, gt=0, le=1)


def u_of_T(T):
    """
    Conserved variable u = T + 4pi T^4.

    Raises:
        ValueError: on negative input.
    """
    T = np.asarray(T, dtype=float)
    if np.any(T < 0):
        raise ValueError("u_of_T needs a nonnegative temperature")
    u = T + FOUR_PI * T**4
    return float(u) if u.ndim == 0 else u


def t_of_u(u, tol: float = constants.T_OF_U_TOL.value):
    """
    Inverse of `u_of_T` on u >= 0.

    Raises:
        ValueError: on negative input.
        ConvergenceError: if the Newton solve fails, which signals an internal error.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("t_of_u needs a nonnegative argument")
    T, _, _ = solve_quartic_balance(u, FOUR_PI, tol=tol, max_iter=100)
    return float(T) if T.ndim == 0 else T


def v_of_T(T: np.ndarray) -> np.ndarray:
    return T + FOUR_PI / 3.0 * T**4


def dv_du(T: np.ndarray) -> np.ndarray:
    """dv/du = (1 + 16pi T^3 / 3) / (1 + 16pi T^3)."""
    cube = T**3
    return (1.0 + 16.0 * np.pi * cube / 3.0) / (1.0 + 16.0 * np.pi * cube)


def _check_mode(grid: SpatialGrid, params: Params, boundary_data: Optional[BoundaryData]):
    grid.check_mode(params.bc_mode)
    if params.bc_mode != BoundaryMode.TORUS and boundary_data is None:
        raise ValueError(f"{params.bc_mode.value} limit runs need boundary data")


def limit_step(
    state: LimitState,
    dt: float,
    params: Params,
    boundary_data: Optional[BoundaryData],
    t: float,
    config: Optional[LimitSolverConfig] = None,
) -> LimitState:
    """
    One backward-Euler step: u - dt (L_h v(u) + s) = u^n with s the Dirichlet
    ghost contribution of v(Tb). Every non-periodic regime imposes T = Tb in
    the limit, Robin included.

    Args:
        t (float): Time at which Tb is evaluated (end of step).

    Raises:
        ConvergenceError: if neither Newton-GMRES nor the damped fixed point converge.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    config = config or LimitSolverConfig()
    grid = state.grid
    _check_mode(grid, params, boundary_data)
    rules = dirichlet_rules(grid)
    lap = laplacian_matrix(grid, rules)
    source = np.zeros(grid.n_cells)
    if grid.faces:
        faces = boundary_temperatures(grid, boundary_data, t)
        source = boundary_source(grid, rules, {f: v_of_T(tb) for f, tb in faces.items()}).ravel()

    u_old = u_of_T(state.temperature.values).ravel()
    threshold = config.newton_tol * max(1.0, float(np.max(np.abs(u_old))))

    def to_T(u: np.ndarray) -> np.ndarray:
        return np.asarray(t_of_u(np.maximum(u, 0.0)))

    def residual(u: np.ndarray, T: np.ndarray) -> np.ndarray:
        return u - dt * (lap @ v_of_T(T) + source) - u_old

    u = u_old.copy()
    T = state.temperature.values.ravel().copy()
    res = residual(u, T)
    iters = 0
    converged = float(np.max(np.abs(res))) <= threshold
    while not converged and iters < config.newton_max_iter:
        slope = dv_du(T)

        def matvec(w: np.ndarray, slope=slope) -> np.ndarray:
            return w - dt * (lap @ (slope * w))

        jac = LinearOperator((grid.n_cells, grid.n_cells), matvec=matvec, dtype=float)
        delta, info = gmres(jac, -res, rtol=config.linear_tol, atol=0.0)
        if info != 0:
            log(f"Limit Newton: GMRES returned info={info}", level="warning")
            break
        norm = float(np.max(np.abs(res)))
        step = 1.0
        while True:
            trial_u = np.maximum(u + step * delta, 0.0)
            trial_T = to_T(trial_u)
            trial_res = residual(trial_u, trial_T)
            if float(np.max(np.abs(trial_res))) < norm or step < 1e-4:
                break
            step *= 0.5
        if float(np.max(np.abs(trial_res))) >= norm:
            break
        u, T, res = trial_u, trial_T, trial_res
        iters += 1
        converged = float(np.max(np.abs(res))) <= threshold

    if not converged:
        log("Limit Newton stalled, falling back to damped Jacobi iteration", level="warning")
        u, T = _fixed_point(u, T, lap, dt, config, residual, to_T, threshold)

    return LimitState(t, TemperatureField(grid, T.reshape(grid.shape)))


def _fixed_point(u, T, lap, dt, config, residual, to_T, threshold):
    diagonal = lap.diagonal()
    for _ in range(config.fixed_point_max_iter):
        res = residual(u, T)
        if float(np.max(np.abs(res))) <= threshold:
            return u, T
        jac_diag = 1.0 - dt * diagonal * dv_du(T)
        u = np.maximum(u - config.damping * res / jac_diag, 0.0)
        T = to_T(u)
    res = residual(u, T)
    if float(np.max(np.abs(res))) <= threshold:
        return u, T
    raise ConvergenceError(
        f"limit step did not converge (residual {np.max(np.abs(res)):.3e} > {threshold:.3e})"
    )


@dataclass
class LimitHistory:
    """Stored limit temperatures at increasing times, for time derivatives of T^4."""

    grid: SpatialGrid
    times: List[float] = field(default_factory=list)
    temperatures: List[np.ndarray] = field(default_factory=list)

    def __call__(self, state: LimitState) -> None:
        self.append(state)

    def append(self, state: LimitState) -> None:
        if self.times and state.time <= self.times[-1]:
            raise ValueError("limit history must be recorded at increasing times")
        self.times.append(float(state.time))
        self.temperatures.append(state.temperature.values.copy())

    def __len__(self) -> int:
        return len(self.times)

    def index_of(self, time: Optional[float]) -> int:
        if not self.times:
            raise ValueError("limit history is empty")
        if time is None:
            return len(self.times) - 1
        times = np.asarray(self.times)
        k = int(np.argmin(np.abs(times - time)))
        if abs(times[k] - time) > 1e-9 * max(1.0, abs(time)):
            raise ValueError(f"limit history has no level at t={time}")
        return k

    def state(self, time: Optional[float] = None) -> LimitState:
        k = self.index_of(time)
        return LimitState(self.times[k], TemperatureField(self.grid, self.temperatures[k]))

    def window(self, k: int, radius: int = 2):
        """Times and stacked temperatures of levels k - radius .. k + radius clipped to range."""
        lo, hi = max(0, k - radius), min(len(self.times), k + radius + 1)
        return np.asarray(self.times[lo:hi]), np.stack(self.temperatures[lo:hi]), k - lo


def limit_advance(
    state: LimitState,
    t_end: float,
    dt: float,
    params: Params,
    boundary_data: Optional[BoundaryData] = None,
    observer: Optional[Callable[[LimitState], None]] = None,
    config: Optional[LimitSolverConfig] = None,
) -> LimitState:
    """
    Repeats `limit_step` with step `dt`, the last one truncated to land on `t_end`.
    The observer sees every new state.
    """
    _check_mode(state.grid, params, boundary_data)
    if t_end < state.time:
        raise ValueError(f"t_end={t_end} is before the state time {state.time}")
    if t_end == state.time:
        return state
    n_steps = max(1, int(np.ceil((t_end - state.time) / dt * (1.0 - 1e-12))))
    times = state.time + dt * np.arange(n_steps + 1)
    times[-1] = t_end
    log(f"Advancing limit equation to t={t_end} in {n_steps} steps of dt={dt:.6g}")
    for step, (t_old, t_new) in enumerate(zip(times[:-1], times[1:]), start=1):
        state = limit_step(state, float(t_new - t_old), params, boundary_data, float(t_new), config)
        log_mod(
            msg=f"limit step {step}/{n_steps}, t={t_new:.6g}",
            level="debug",
            index=step,
            mod=constants.LOG_EVERY_N_STEPS.value,
        )
        if observer is not None:
            observer(state)
    return state
