# -*- coding: utf-8 -*-
"""
Time integration of the eps-scaled temperature/intensity system by Lie splitting:
explicit upwind transport, backward-Euler diffusion, then the stiff relaxation
solved implicitly cell by cell.
"""
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from prefeitura_rio.pipelines_utils.logging import log, log_mod
from pydantic import BaseModel, ConfigDict, Field
from scipy.sparse import identity
from scipy.sparse.linalg import LinearOperator, cg, gmres

from pipelines.constants import constants
from pipelines.radiative_transfer.models.core import (
    BoundaryData,
    BoundaryMode,
    ConvergenceError,
    Face,
    IntensityField,
    KineticState,
    Params,
    SpatialGrid,
    StabilityError,
    TemperatureField,
    boundary_slab,
)
from pipelines.radiative_transfer.models.operators import (
    boundary_source,
    boundary_temperatures,
    ghost_rules,
    laplacian_matrix,
    solve_quartic_balance,
)
from pipelines.radiative_transfer.models.quadrature import (
    AngularQuadrature,
    angular_average,
    reflection_map,
)


class KineticSolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    cfl: float = Field(default=constants.DEFAULT_CFL.value, gt=0, le=1)
    newton_tol: float = Field(default=constants.NEWTON_TOL.value, gt=0)
    newton_max_iter: int = Field(default=constants.NEWTON_MAX_ITER.value, ge=1)
    dt_override: Optional[float] = Field(default=None, gt=0)
    galerkin_modes: Optional[int] = Field(default=None, ge=0)
    linear_tol: float = Field(default=constants.LINEAR_TOL.value, gt=0)


@dataclass
class StepReport:
    dt_used: float
    newton_iters_max: int = 0
    clamped_cells: int = 0
    step: int = 0
    time: float = 0.0


Observer = Callable[[KineticState, StepReport], None]


def _transport_speed(grid: SpatialGrid, quad: AngularQuadrature) -> float:
    """max_q sum_a |beta_qa| / dx_a over the active axes."""
    beta = np.abs(quad.nodes[:, : grid.dim])
    beta[beta < constants.ZERO_VELOCITY_TOL.value] = 0.0
    return float(np.max(beta @ (1.0 / np.asarray(grid.spacing))))


def stable_dt(
    grid: SpatialGrid,
    quad: AngularQuadrature,
    params: Params,
    config: KineticSolverConfig,
) -> float:
    """
    Time step min(cfl * eps / speed, dx_min^2 / (2 dim)) with
    speed = max_q sum_a |beta_qa| / dx_a, or `config.dt_override` when set.

    In one dimension the transport term is cfl * eps * dx / max_q |beta_q . e1|.
    In 2D/3D the Courant numbers of all axes are summed, since the update is unsplit,
    so dt is smaller than the per-axis bound and shrinks as `dim` grows.
    """
    if config.dt_override is not None:
        return float(config.dt_override)
    speed = _transport_speed(grid, quad)
    diffusion_cap = min(grid.spacing) ** 2 / (2.0 * grid.dim)
    if speed == 0.0:
        return diffusion_cap
    return min(config.cfl * params.epsilon / speed, diffusion_cap)


def courant_numbers(
    grid: SpatialGrid, quad: AngularQuadrature, params: Params, dt: float
) -> np.ndarray:
    """Signed Courant numbers beta_qa dt / (eps dx_a), shape (Q, dim)."""
    beta = quad.nodes[:, : grid.dim].copy()
    beta[np.abs(beta) < constants.ZERO_VELOCITY_TOL.value] = 0.0
    return beta * dt / (params.epsilon * np.asarray(grid.spacing))


def apply_psi_boundary(
    state: KineticState,
    t: float,
    face: Face,
    params: Params,
    quad: AngularQuadrature,
    boundary_data: BoundaryData,
) -> np.ndarray:
    """
    Ghost intensities beyond a non-periodic face.

    Incoming ordinates (n.beta < 0) get alpha * psi_b + (1 - alpha) * psi(reflected
    ordinate) of the adjacent cell; outgoing ones copy the adjacent cell.

    Returns:
        np.ndarray: ghost layer shaped like the face slab of the intensity.

    Raises:
        ValueError: if `face` lies on a periodic axis.
    """
    grid = state.grid
    if grid.periodic_per_axis[face.axis]:
        raise ValueError(f"face {face.name} is periodic and has no boundary condition")
    adjacent = boundary_slab(state.intensity.values, face)
    normal = face.normal
    incoming = quad.nodes @ normal < -constants.ZERO_VELOCITY_TOL.value
    perm = reflection_map(quad, normal)
    psi_b = boundary_data.psi_values(t, grid.face_points(face), quad.nodes)

    ghost = adjacent.copy()
    ghost[..., incoming] = (
        params.alpha * psi_b[..., incoming]
        + (1.0 - params.alpha) * adjacent[..., perm[incoming]]
    )
    return ghost


def step_transport(
    state: KineticState,
    dt: float,
    params: Params,
    quad: AngularQuadrature,
    boundary_data: Optional[BoundaryData] = None,
) -> IntensityField:
    """
    Unsplit first-order upwind update of d_t psi + (1/eps) beta . grad psi = 0.

    Raises:
        StabilityError: if max_q sum_a |courant_qa| exceeds 1.
    """
    grid = state.grid
    courant = courant_numbers(grid, quad, params, dt)
    worst = float(np.max(np.abs(courant).sum(axis=1)))
    if worst > 1.0 + 1e-12:
        raise StabilityError(
            f"transport step dt={dt!r} gives Courant sum {worst:.6g} > 1 "
            f"(eps={params.epsilon}, dx={grid.spacing})"
        )

    psi = state.intensity.values
    new = psi.copy()
    for axis in range(grid.dim):
        c = courant[:, axis]
        if not np.any(c):
            continue
        if grid.periodic_per_axis[axis]:
            left = np.roll(psi, 1, axis=axis)
            right = np.roll(psi, -1, axis=axis)
        else:
            if boundary_data is None:
                raise ValueError("non-periodic transport needs boundary data")
            low = apply_psi_boundary(state, state.time, Face(axis, -1), params, quad, boundary_data)
            high = apply_psi_boundary(state, state.time, Face(axis, 1), params, quad, boundary_data)
            padded = np.concatenate([low, psi, high], axis=axis)
            n = grid.cells_per_axis[axis]
            left = np.take(padded, np.arange(0, n), axis=axis)
            right = np.take(padded, np.arange(2, n + 2), axis=axis)
        new -= np.maximum(c, 0.0) * (psi - left) + np.minimum(c, 0.0) * (right - psi)
    return IntensityField(grid, new)


def step_relaxation(
    state: KineticState,
    dt: float,
    params: Params,
    quad: AngularQuadrature,
    config: Optional[KineticSolverConfig] = None,
) -> Tuple[TemperatureField, IntensityField, StepReport]:
    """
    Backward-Euler solve of dT/dt = <psi - T^4>/eps^2, dpsi/dt = -(psi - T^4)/eps^2.

    Eliminating psi leaves T + 4pi k T^4 = T^n + k <psi^n> per cell with
    k = lam / (1 + lam), lam = dt / eps^2; then
    psi_q = (psi_q^n + lam T^4) / (1 + lam). T + <psi> is conserved per cell.
    """
    config = config or KineticSolverConfig()
    grid = state.grid
    lam = dt / params.epsilon**2
    kappa = lam / (1.0 + lam)
    total_weight = float(quad.weights.sum())

    T0 = state.temperature.values
    psi0 = state.intensity.values
    rhs = T0 + kappa * angular_average(psi0, quad)
    T1, iters, clamped = solve_quartic_balance(
        rhs,
        kappa * total_weight,
        start=T0,
        tol=config.newton_tol,
        max_iter=config.newton_max_iter,
    )
    if clamped:
        log(f"Relaxation clamped {clamped} negative temperatures to zero", level="warning")
    psi1 = (psi0 + lam * (T1**4)[..., None]) / (1.0 + lam)
    report = StepReport(dt_used=dt, newton_iters_max=int(iters.max()), clamped_cells=clamped)
    return TemperatureField(grid, T1), IntensityField(grid, psi1), report


def step_diffusion(
    temperature: TemperatureField,
    dt: float,
    params: Params,
    boundary_data: Optional[BoundaryData],
    t: float,
    linear_tol: float = constants.LINEAR_TOL.value,
) -> TemperatureField:
    """
    Backward-Euler step (I - dt L_h) T = T^n + dt s(t) for the ghost-cell Laplacian.

    Args:
        t (float): Time at which the boundary temperature is evaluated (end of step).

    Raises:
        ConvergenceError: if CG stops before `linear_tol` relative residual.
    """
    grid = temperature.grid
    rules = ghost_rules(grid, params)
    lap = laplacian_matrix(grid, rules)
    rhs = temperature.values.ravel().copy()
    if grid.faces:
        if boundary_data is None:
            raise ValueError(f"{params.bc_mode.value} diffusion needs boundary data")
        faces = boundary_temperatures(grid, boundary_data, t)
        rhs += dt * boundary_source(grid, rules, faces).ravel()

    system = identity(grid.n_cells, format="csr") - dt * lap
    solution, info = cg(system, rhs, x0=temperature.values.ravel(), rtol=linear_tol, atol=0.0)
    if info > 0:
        raise ConvergenceError(f"diffusion CG did not converge after {info} iterations")
    if info < 0:
        raise ValueError("diffusion CG received an illegal input")
    return TemperatureField(grid, solution.reshape(grid.shape))


class FourierProjector:
    """
    Truncation P_m of the spatial Fourier series to wavenumbers |k| <= m on a torus,
    with integer k per axis and the Euclidean norm.
    """

    def __init__(self, grid: SpatialGrid, modes: int):
        if not grid.is_torus:
            raise ValueError("Fourier truncation needs a fully periodic grid")
        wavenumbers = np.meshgrid(
            *[np.fft.fftfreq(n, 1.0 / n) for n in grid.cells_per_axis], indexing="ij"
        )
        norm = np.sqrt(sum(k**2 for k in wavenumbers))
        self.grid = grid
        self.modes = modes
        self.mask = norm <= modes + 1e-12
        self.is_identity = bool(self.mask.all())

    def __call__(self, values: np.ndarray) -> np.ndarray:
        if self.is_identity:
            return values
        axes = tuple(range(self.grid.dim))
        spectrum = np.fft.fftn(values, axes=axes)
        mask = self.mask.reshape(self.mask.shape + (1,) * (values.ndim - self.grid.dim))
        return np.fft.ifftn(spectrum * mask, axes=axes).real


def galerkin_relaxation(
    state: KineticState,
    dt: float,
    params: Params,
    quad: AngularQuadrature,
    config: KineticSolverConfig,
    projector: FourierProjector,
) -> Tuple[TemperatureField, IntensityField, StepReport]:
    """
    Relaxation with T^4 replaced by P_m(T^4): a global system
    T + 4pi k P_m(T^4) = T^n + k <psi^n>, solved by Newton-GMRES.
    """
    if projector.is_identity:
        return step_relaxation(state, dt, params, quad, config)

    grid = state.grid
    lam = dt / params.epsilon**2
    kappa = lam / (1.0 + lam)
    a = kappa * float(quad.weights.sum())
    psi0 = state.intensity.values
    rhs = state.temperature.values + kappa * angular_average(psi0, quad)
    threshold = config.newton_tol * max(1.0, float(np.max(np.abs(rhs))))

    def residual(x: np.ndarray) -> np.ndarray:
        return x + a * projector(x**4) - rhs

    x = state.temperature.values.copy()
    res = residual(x)
    iters = 0
    while float(np.max(np.abs(res))) > threshold:
        if iters >= config.newton_max_iter:
            raise ConvergenceError(
                f"Galerkin relaxation did not converge in {iters} iterations "
                f"(residual {np.max(np.abs(res)):.3e})"
            )
        cube = x**3

        def matvec(w: np.ndarray, cube=cube) -> np.ndarray:
            w = w.reshape(grid.shape)
            return (w + 4.0 * a * projector(cube * w)).ravel()

        jac = LinearOperator((grid.n_cells, grid.n_cells), matvec=matvec, dtype=float)
        delta, info = gmres(jac, -res.ravel(), rtol=config.linear_tol, atol=0.0)
        if info != 0:
            raise ConvergenceError(f"Galerkin relaxation GMRES failed (info={info})")
        delta = delta.reshape(grid.shape)

        norm = float(np.max(np.abs(res)))
        step = 1.0
        while True:
            trial = x + step * delta
            trial_res = residual(trial)
            if float(np.max(np.abs(trial_res))) <= (1.0 - 1e-4 * step) * norm or step < 1e-3:
                break
            step *= 0.5
        x, res = trial, trial_res
        iters += 1

    clamped = int(np.sum(x < 0))
    if clamped:
        log(f"Galerkin relaxation clamped {clamped} negative temperatures", level="warning")
        x = np.maximum(x, 0.0)
    psi1 = (psi0 + lam * projector(x**4)[..., None]) / (1.0 + lam)
    report = StepReport(dt_used=dt, newton_iters_max=iters, clamped_cells=clamped)
    return TemperatureField(grid, x), IntensityField(grid, psi1), report


def _step_times(t0: float, t_end: float, dt: float) -> np.ndarray:
    n_steps = max(1, int(np.ceil((t_end - t0) / dt * (1.0 - 1e-12))))
    times = t0 + dt * np.arange(n_steps + 1)
    times[-1] = t_end
    return times


def _integrate(
    state: KineticState,
    t_end: float,
    params: Params,
    config: KineticSolverConfig,
    quad: AngularQuadrature,
    boundary_data: Optional[BoundaryData],
    observer: Optional[Observer],
    relax: Callable,
) -> KineticState:
    grid = state.grid
    grid.check_mode(params.bc_mode)
    if params.bc_mode != BoundaryMode.TORUS and boundary_data is None:
        raise ValueError(f"{params.bc_mode.value} runs need boundary data")
    if state.intensity.n_ordinates != quad.n_nodes:
        raise ValueError("intensity and quadrature disagree on the ordinate count")
    if t_end < state.time:
        raise ValueError(f"t_end={t_end} is before the state time {state.time}")
    if t_end == state.time:
        return state

    dt = stable_dt(grid, quad, params, config)
    times = _step_times(state.time, t_end, dt)
    log(
        f"Advancing eps={params.epsilon} ({params.bc_mode.value}) from t={state.time} "
        f"to t={t_end} in {len(times) - 1} steps of dt={dt:.6g}"
    )
    for step, (t_old, t_new) in enumerate(zip(times[:-1], times[1:]), start=1):
        h = float(t_new - t_old)
        psi = step_transport(state, h, params, quad, boundary_data)
        temperature = step_diffusion(
            state.temperature, h, params, boundary_data, float(t_new), config.linear_tol
        )
        staged = KineticState(float(t_new), temperature, psi)
        temperature, psi, report = relax(staged, h, params, quad, config)
        state = KineticState(float(t_new), temperature, psi)

        report.step = step
        report.time = float(t_new)
        log_mod(
            msg=f"step {step}/{len(times) - 1}, t={t_new:.6g}, newton={report.newton_iters_max}",
            level="debug",
            index=step,
            mod=constants.LOG_EVERY_N_STEPS.value,
        )
        if observer is not None:
            observer(state, report)
    return state


def advance(
    state: KineticState,
    t_end: float,
    params: Params,
    config: KineticSolverConfig,
    quad: AngularQuadrature,
    boundary_data: Optional[BoundaryData] = None,
    observer: Optional[Observer] = None,
) -> KineticState:
    """
    Repeats transport -> diffusion -> relaxation with dt from `stable_dt`,
    truncating the last step to land on `t_end`. The observer is called after
    every full step with the new state and its `StepReport`.

    Raises:
        ValueError: if the grid does not match the boundary regime, boundary data
            is missing, or t_end precedes the state time.
    """
    return _integrate(
        state, t_end, params, config, quad, boundary_data, observer, relax=step_relaxation
    )


def galerkin_project_state(state: KineticState, projector: FourierProjector) -> KineticState:
    temperature = projector(state.temperature.values)
    if np.any(temperature < 0):
        log("Projected initial temperature has negative values", level="warning")
    return KineticState(
        state.time,
        TemperatureField(state.grid, temperature),
        IntensityField(state.grid, projector(state.intensity.values)),
    )


def galerkin_advance(
    state: KineticState,
    t_end: float,
    params: Params,
    config: KineticSolverConfig,
    quad: AngularQuadrature,
    observer: Optional[Observer] = None,
) -> KineticState:
    """
    Torus-only variant where T^4 in the relaxation is replaced by its truncation
    P_m(T^4), m = `config.galerkin_modes`. Initial data are projected too.

    Raises:
        ValueError: outside torus mode or without `galerkin_modes`.
    """
    if params.bc_mode != BoundaryMode.TORUS:
        raise ValueError("Galerkin mode is only defined on the torus")
    if config.galerkin_modes is None:
        raise ValueError("Galerkin mode needs config.galerkin_modes")
    projector = FourierProjector(state.grid, config.galerkin_modes)
    log(f"Galerkin mode m={projector.modes} (identity: {projector.is_identity})")

    def relax(staged, h, params, quad, config):
        return galerkin_relaxation(staged, h, params, quad, config, projector)

    state = galerkin_project_state(state, projector)
    return _integrate(state, t_end, params, config, quad, None, observer, relax=relax)
