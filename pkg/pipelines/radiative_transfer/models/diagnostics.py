# -*- coding: utf-8 -*-
"""
Energy and relative-entropy functionals of the kinetic and limit solutions:
energy records and their audits, the corrected intensity profile, its remainder,
relative entropy, expansion residuals and convergence-rate fits.

All spatial integrals are midpoint (cell-sum) rules, boundary integrals are
face sums and angular integrals use the run's quadrature.
"""
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from prefeitura_rio.pipelines_utils.logging import log
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq
from scipy.stats import linregress

from pipelines.constants import constants
from pipelines.radiative_transfer.models.core import (
    BoundaryData,
    BoundaryMode,
    IntensityField,
    KineticState,
    LimitState,
    Params,
    SpatialGrid,
    TemperatureField,
    boundary_slab,
)
from pipelines.radiative_transfer.models.kinetic_solver import StepReport
from pipelines.radiative_transfer.models.limit_solver import LimitHistory, u_of_T
from pipelines.radiative_transfer.models.operators import (
    directional_derivative,
    directional_derivative_per_node,
    face_temperature,
    ghost_rule,
    interior_mask,
    second_directional_derivative,
)
from pipelines.radiative_transfer.models.quadrature import AngularQuadrature

THEOREM_GRAD_WEIGHT = 16.0 / 25.0


@dataclass
class EnergyRecord:
    time: float
    energy_T5: float
    energy_psi2: float
    dissipation_grad: float
    dissipation_relax: float
    boundary_outflow: float = 0.0
    boundary_robin: float = 0.0
    residual: float = float("nan")


@dataclass
class EntropyRecord:
    time: float
    H: float
    H_T_part: float
    H_psi_part: float
    error_L4_4: float
    error_L2_2: float

    @property
    def error(self) -> float:
        return self.error_L4_4 + self.error_L2_2


def energy(state: KineticState, quad: AngularQuadrature) -> Tuple[float, float]:
    """(int T^5 / 5 dx, int int psi^2 / 2 dbeta dx)."""
    vol = state.grid.cell_volume
    energy_T5 = vol * float(np.sum(state.temperature.values**5)) / 5.0
    energy_psi2 = vol * float(np.sum(state.intensity.values**2 @ quad.weights)) / 2.0
    return energy_T5, energy_psi2


def dissipation_grad(temperature: TemperatureField) -> float:
    """int |grad T^{5/2}|^2 dx with face differences (wall faces excluded)."""
    grid = temperature.grid
    f = np.maximum(temperature.values, 0.0) ** 2.5
    total = 0.0
    for axis in range(grid.dim):
        if grid.periodic_per_axis[axis]:
            jumps = np.roll(f, -1, axis=axis) - f
        else:
            jumps = np.diff(f, axis=axis)
        total += float(np.sum((jumps / grid.spacing[axis]) ** 2))
    return total * grid.cell_volume


def dissipation_relax(state: KineticState, quad: AngularQuadrature, params: Params) -> float:
    """(1/eps^2) int int (psi - T^4)^2."""
    gap = state.intensity.values - (state.temperature.values**4)[..., None]
    return state.grid.cell_volume * float(np.sum(gap**2 @ quad.weights)) / params.epsilon**2


def boundary_outflow(
    state: KineticState,
    quad: AngularQuadrature,
    params: Params,
    boundary_data: Optional[BoundaryData],
) -> float:
    """(2 alpha - alpha^2) / (2 eps) * sum over outgoing ordinates of w |n.beta| (psi - psi_b)^2."""
    grid = state.grid
    if not grid.faces or boundary_data is None:
        return 0.0
    coeff = (2.0 * params.alpha - params.alpha**2) / (2.0 * params.epsilon)
    total = 0.0
    for face in grid.faces:
        cosines = quad.nodes @ face.normal
        outgoing = cosines > constants.ZERO_VELOCITY_TOL.value
        psi = boundary_slab(state.intensity.values, face)[..., outgoing]
        psi_b = boundary_data.psi_values(state.time, grid.face_points(face), quad.nodes)
        gap = (psi - psi_b[..., outgoing]) ** 2
        total += grid.face_area(face) * float(np.sum(gap @ (quad.weights * cosines)[outgoing]))
    return coeff * total


def boundary_robin(
    state: KineticState, params: Params, boundary_data: Optional[BoundaryData]
) -> float:
    """eps^{-r} sum over wall faces of |T_face - Tb|^5, zero outside Robin mode."""
    grid = state.grid
    if params.bc_mode != BoundaryMode.ROBIN or boundary_data is None:
        return 0.0
    total = 0.0
    for face in grid.faces:
        tb = boundary_data.t_values(state.time, grid.face_points(face))
        rule = ghost_rule(grid, params, face.axis)
        t_face = face_temperature(state.temperature.values, face, rule, tb)
        total += grid.face_area(face) * float(np.sum(np.abs(t_face - tb) ** 5))
    return total / params.epsilon**params.robin_r


def energy_record(
    state: KineticState,
    quad: AngularQuadrature,
    params: Params,
    boundary_data: Optional[BoundaryData] = None,
) -> EnergyRecord:
    energy_T5, energy_psi2 = energy(state, quad)
    return EnergyRecord(
        time=state.time,
        energy_T5=energy_T5,
        energy_psi2=energy_psi2,
        dissipation_grad=dissipation_grad(state.temperature),
        dissipation_relax=dissipation_relax(state, quad, params),
        boundary_outflow=boundary_outflow(state, quad, params, boundary_data),
        boundary_robin=boundary_robin(state, params, boundary_data),
    )


class EnergyMonitor:
    """
    Observer for `advance`: keeps every StepReport and an EnergyRecord every
    `record_every` steps, plus the initial and final states.
    """

    def __init__(
        self,
        quad: AngularQuadrature,
        params: Params,
        boundary_data: Optional[BoundaryData] = None,
        record_every: int = 1,
    ):
        if record_every < 1:
            raise ValueError("record_every must be >= 1")
        self.quad = quad
        self.params = params
        self.boundary_data = boundary_data
        self.record_every = record_every
        self.records: List[EnergyRecord] = []
        self.reports: List[StepReport] = []
        self._last_state: Optional[KineticState] = None

    def start(self, state: KineticState) -> None:
        self.records = [energy_record(state, self.quad, self.params, self.boundary_data)]
        self.reports = []
        self._last_state = None

    def __call__(self, state: KineticState, report: StepReport) -> None:
        self.reports.append(report)
        self._last_state = state
        if report.step % self.record_every == 0:
            self.records.append(energy_record(state, self.quad, self.params, self.boundary_data))

    def finish(self) -> None:
        """Records the final state if the stride skipped it."""
        if self._last_state is not None and self.records[-1].time != self._last_state.time:
            self.records.append(
                energy_record(self._last_state, self.quad, self.params, self.boundary_data)
            )

    def energy_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.records], columns=constants.ENERGY_COLUMNS.value)

    def step_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.reports], columns=constants.STEP_COLUMNS.value)


@dataclass
class EnergyAudit:
    regime: BoundaryMode
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    residual: np.ndarray
    growth_constant: Optional[float] = None
    nonnegative: bool = True
    negative_terms: List[str] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual))

    def passed(self, tol: float = 0.0) -> bool:
        finite_growth = self.growth_constant is None or np.isfinite(self.growth_constant)
        return self.nonnegative and finite_growth and self.max_residual <= tol


def _smallest_admissible(excess: Callable[[float], float], lo: float, c_max: float) -> float:
    """
    Smallest c in [lo, c_max] with excess(c) <= 0 for an excess that decreases in c,
    inf if none. The bracket doubles from lo so exp(c t) stays finite.
    """
    if excess(lo) <= 0:
        return lo
    hi = lo
    while excess(hi) > 0:
        if hi >= c_max:
            return float("inf")
        lo, hi = hi, min(max(2.0 * hi, 1.0), c_max)
    return float(brentq(excess, lo, hi, xtol=1e-12))


def _fit_growth_constant(times, lhs, c_max: float) -> float:
    base = lhs[0]
    if base <= 0:
        return 1.0

    def excess(c: float) -> float:
        return float(np.max(lhs - c * np.exp(c * times) * base))

    return _smallest_admissible(excess, 1.0, c_max)


def energy_audit(
    records: Sequence[EnergyRecord],
    params: Params,
    c_max: float = constants.GRONWALL_C_MAX.value,
) -> EnergyAudit:
    """
    Signed residuals LHS(t) - RHS(t) of the regime's energy inequality.

    Torus: E_T5 + E_psi2 + int (16/25 D_grad + D_relax) against the initial energy.
    Dirichlet/Robin: 5 E_T5 + 2 E_psi2 + int (D_grad + D_relax + boundary terms)
    against C e^{Ct} LHS(0), with the smallest C >= 1 that holds on the series.
    Time integrals use the cumulative trapezoid rule. The residual of every
    record is updated in place.

    Raises:
        ValueError: on an empty or unordered series.
    """
    if not records:
        raise ValueError("energy audit needs at least one record")
    times = np.array([r.time for r in records])
    if np.any(np.diff(times) <= 0):
        raise ValueError("energy records must be in increasing time order")

    columns = {
        name: np.array([getattr(r, name) for r in records])
        for name in (
            "energy_T5",
            "energy_psi2",
            "dissipation_grad",
            "dissipation_relax",
            "boundary_outflow",
            "boundary_robin",
        )
    }
    negative_terms = [
        name
        for name in ("dissipation_grad", "dissipation_relax", "boundary_outflow", "boundary_robin")
        if np.any(columns[name] < 0) or not np.all(np.isfinite(columns[name]))
    ]

    regime = params.bc_mode
    if regime == BoundaryMode.TORUS:
        rate = THEOREM_GRAD_WEIGHT * columns["dissipation_grad"] + columns["dissipation_relax"]
        lhs = columns["energy_T5"] + columns["energy_psi2"]
        lhs = lhs + cumulative_trapezoid(rate, times, initial=0.0)
        rhs = np.full_like(lhs, lhs[0])
        growth = None
    else:
        rate = (
            columns["dissipation_grad"]
            + columns["dissipation_relax"]
            + columns["boundary_outflow"]
            + columns["boundary_robin"]
        )
        lhs = 5.0 * columns["energy_T5"] + 2.0 * columns["energy_psi2"]
        lhs = lhs + cumulative_trapezoid(rate, times, initial=0.0)
        growth = _fit_growth_constant(times - times[0], lhs, c_max)
        effective = growth if np.isfinite(growth) else c_max
        rhs = effective * np.exp(effective * (times - times[0])) * lhs[0]

    residual = lhs - rhs
    for record, value in zip(records, residual):
        record.residual = float(value)
    if negative_terms:
        log(f"Energy audit found negative terms: {negative_terms}", level="warning")
    return EnergyAudit(
        regime=regime,
        times=times,
        lhs=lhs,
        rhs=rhs,
        residual=residual,
        growth_constant=growth,
        nonnegative=not negative_terms,
        negative_terms=negative_terms,
    )


def limit_energy(state: LimitState) -> dict:
    T = state.temperature.values
    vol = state.grid.cell_volume
    return {
        "time": state.time,
        "energy_T5": vol * float(np.sum(T**5)) / 5.0,
        "conserved_u": vol * float(np.sum(u_of_T(T))),
        "t_min": float(T.min()),
        "t_max": float(T.max()),
    }


def _fourth_power_derivatives(
    history: LimitHistory, time: Optional[float]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, int]:
    """f = T^4 on the window around `time`, with its first and second time derivatives."""
    if len(history) < 2:
        raise ValueError("at least two limit levels are needed for time derivatives")
    k = history.index_of(time)
    times, temps, j = history.window(k)
    if times.size < 2:
        raise ValueError("insufficient limit history around the requested time")
    f = temps**4
    order = 2 if times.size >= 3 else 1
    f_t = np.gradient(f, times, axis=0, edge_order=order)
    f_tt = np.gradient(f_t, times, axis=0, edge_order=order)
    return f, f_t, f_tt, times, j


def _psibar_from(f, f_t, grid: SpatialGrid, epsilon: float, nodes: np.ndarray) -> np.ndarray:
    return (
        f[..., None]
        - epsilon * directional_derivative(f, grid, nodes)
        - epsilon**2 * f_t[..., None]
        + epsilon**2 * second_directional_derivative(f, grid, nodes)
    )


def corrected_psibar(
    history: LimitHistory,
    epsilon: float,
    quad: AngularQuadrature,
    time: Optional[float] = None,
) -> IntensityField:
    """
    psibar = f - eps beta.grad f - eps^2 d_t f + eps^2 beta.grad(beta.grad f), f = Tbar^4,
    at `time` (default: last stored level).

    Raises:
        ValueError: if the history cannot provide d_t f.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    grid = history.grid
    if epsilon == 0:
        k = history.index_of(time)
        f = history.temperatures[k] ** 4
        return IntensityField(grid, np.repeat(f[..., None], quad.n_nodes, axis=-1))
    f, f_t, _, _, j = _fourth_power_derivatives(history, time)
    return IntensityField(grid, _psibar_from(f[j], f_t[j], grid, epsilon, quad.nodes))


def remainder_Rbar(
    history: LimitHistory,
    epsilon: float,
    quad: AngularQuadrature,
    time: Optional[float] = None,
    variant: Literal["derived", "displayed"] = "derived",
) -> IntensityField:
    """
    Closed form of the defect psibar leaves in the kinetic equation, with D = beta.grad:

    - "derived": eps D(-2 f_t + D^2 f) - eps^2 (f_tt - D^2 f_t), equal to
      d_t psibar + D psibar / eps + (psibar - f) / eps^2 term by term;
    - "displayed": eps D(-2 f_t + D^2 f_t) - eps^2 (f_t - D^2 f_t), the form in
      which every term carries a time derivative.
    """
    grid = history.grid
    nodes = quad.nodes
    f, f_t, f_tt, _, j = _fourth_power_derivatives(history, time)
    grad_ft = directional_derivative(f_t[j], grid, nodes)
    hess_ft = second_directional_derivative(f_t[j], grid, nodes)
    if variant == "derived":
        third = directional_derivative_per_node(
            second_directional_derivative(f[j], grid, nodes), grid, nodes
        )
        values = epsilon * (-2.0 * grad_ft + third) - epsilon**2 * (f_tt[j][..., None] - hess_ft)
    elif variant == "displayed":
        third = directional_derivative_per_node(hess_ft, grid, nodes)
        values = epsilon * (-2.0 * grad_ft + third) - epsilon**2 * (f_t[j][..., None] - hess_ft)
    else:
        raise ValueError(f"unknown remainder variant {variant!r}")
    return IntensityField(grid, values)


def remainder_Rbar_definition(
    history: LimitHistory,
    epsilon: float,
    quad: AngularQuadrature,
    time: Optional[float] = None,
) -> IntensityField:
    """Defining residual d_t psibar + beta.grad psibar / eps + (psibar - Tbar^4) / eps^2."""
    if epsilon <= 0:
        raise ValueError("the defining residual needs epsilon > 0")
    grid = history.grid
    f, f_t, _, times, j = _fourth_power_derivatives(history, time)
    levels = np.stack(
        [_psibar_from(f[i], f_t[i], grid, epsilon, quad.nodes) for i in range(times.size)]
    )
    order = 2 if times.size >= 3 else 1
    psibar_t = np.gradient(levels, times, axis=0, edge_order=order)[j]
    psibar = levels[j]
    values = (
        psibar_t
        + directional_derivative_per_node(psibar, grid, quad.nodes) / epsilon
        + (psibar - f[j][..., None]) / epsilon**2
    )
    return IntensityField(grid, values)


def relative_entropy(
    kin: KineticState,
    limit_temperature: TemperatureField,
    psibar: IntensityField,
    quad: AngularQuadrature,
) -> EntropyRecord:
    """
    H = int (T^5 - Tbar^5 - 5 Tbar^4 (T - Tbar)) / 5 + int int (psi - psibar)^2 / 2,
    with the temperature part evaluated as g^2 (10A^3 + 10A^2 g + 5A g^2 + g^3) / 5,
    A = Tbar, g = T - Tbar.

    Raises:
        ValueError: on grid mismatch or a negative limit temperature.
    """
    grid = kin.grid
    if limit_temperature.grid != grid or psibar.grid != grid:
        raise ValueError("kinetic and limit fields live on different grids")
    if psibar.n_ordinates != quad.n_nodes:
        raise ValueError("psibar and quadrature disagree on the ordinate count")
    A = limit_temperature.values
    if np.any(A < 0):
        raise ValueError("relative entropy needs a nonnegative limit temperature")
    g = kin.temperature.values - A
    vol = grid.cell_volume
    h_T = vol * float(np.sum(g**2 * (10 * A**3 + 10 * A**2 * g + 5 * A * g**2 + g**3))) / 5.0
    gap2 = float(np.sum((kin.intensity.values - psibar.values) ** 2 @ quad.weights)) * vol
    return EntropyRecord(
        time=kin.time,
        H=h_T + 0.5 * gap2,
        H_T_part=h_T,
        H_psi_part=0.5 * gap2,
        error_L4_4=vol * float(np.sum(g**4)),
        error_L2_2=gap2,
    )


def lmtg_check(A, g, c) -> Tuple[np.ndarray, np.ndarray]:
    """
    Checks (A + g)^5 - A^5 - 5 A^4 g >= c^3 g^2 + c g^4 for A >= c > 0, A + g >= 0.

    Returns:
        Tuple[np.ndarray, np.ndarray]: pass flags and margins LHS - RHS, computed as
        g^2 (10A^3 + 10A^2 g + 5A g^2 + g^3 - c^3 - c g^2).

    Raises:
        ValueError: if a precondition is violated.
    """
    A, g, c = (np.asarray(v, dtype=float) for v in (A, g, c))
    if np.any(c <= 0) or np.any(A < c) or np.any(A + g < 0):
        raise ValueError("lmtg_check needs A >= c > 0 and A + g >= 0")
    margin = g**2 * (10 * A**3 + 10 * A**2 * g + 5 * A * g**2 + g**3 - c**3 - c * g**2)
    return margin >= 0, margin


def expansion_residual(
    state: KineticState,
    history: LimitHistory,
    epsilon: float,
    quad: AngularQuadrature,
    order: int,
    time: Optional[float] = None,
) -> float:
    """
    Sup over interior cells and ordinates of psi - (expansion of T^4 truncated at eps^order).

    Order 0 uses f = Tbar^4, order 1 subtracts eps beta.grad f, order 2 further
    subtracts eps^2 (d_t f - beta.grad(beta.grad f)).
    """
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    grid = history.grid
    if state.grid != grid:
        raise ValueError("kinetic state and limit history live on different grids")
    time = state.time if time is None else time
    k = history.index_of(time)
    f = history.temperatures[k] ** 4
    expansion = np.repeat(f[..., None], quad.n_nodes, axis=-1)
    if order >= 1:
        expansion = expansion - epsilon * directional_derivative(f, grid, quad.nodes)
    if order == 2:
        _, f_t, _, _, j = _fourth_power_derivatives(history, time)
        expansion = expansion - epsilon**2 * (
            f_t[j][..., None] - second_directional_derivative(f, grid, quad.nodes)
        )
    gap = np.abs(state.intensity.values - expansion)
    return float(np.max(gap[interior_mask(grid)]))


def split_norms(values: np.ndarray, grid: SpatialGrid) -> dict:
    """Sup norms of an intensity-shaped array on interior cells and on the full grid."""
    mask = interior_mask(grid)
    return {"interior": float(np.max(np.abs(values[mask]))), "full": float(np.max(np.abs(values)))}


def predicted_rate(params: Params) -> float:
    """Rate s of the relative-entropy bound: 2 on the torus, 1 for Dirichlet, min(1, r) for Robin."""
    if params.bc_mode == BoundaryMode.TORUS:
        return 2.0
    if params.bc_mode == BoundaryMode.DIRICHLET:
        return 1.0
    return min(1.0, params.robin_r)


class RateFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float


def fit_rate(pairs: Iterable[Tuple[float, float]]) -> RateFit:
    """
    Least-squares line through (log eps, log error); the slope is the observed order.

    Raises:
        ValueError: with fewer than 3 pairs or a nonpositive entry.
    """
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError(f"fit_rate needs at least 3 pairs, got {len(pairs)}")
    eps, err = np.array(pairs, dtype=float).T
    if np.any(eps <= 0) or np.any(err <= 0):
        raise ValueError("fit_rate needs positive epsilons and errors")
    fit = linregress(np.log(eps), np.log(err))
    return RateFit(float(fit.slope), float(fit.intercept), float(fit.rvalue**2))


def fit_gronwall_constant(
    series: Sequence[Tuple[float, Sequence[float], Sequence[float]]],
    rate: float,
    c_max: float = constants.GRONWALL_C_MAX.value,
) -> float:
    """
    Smallest C in [0, c_max] with H(t) <= (H(0) + C eps^rate) e^{C t} on every member.

    Args:
        series: (eps, times, H values) per sweep member, times starting at the
            member's initial time.

    Returns:
        float: the fitted constant, or inf if no C up to `c_max` works.
    """

    def excess(c: float) -> float:
        worst = -np.inf
        for eps, times, values in series:
            times = np.asarray(times, dtype=float) - float(times[0])
            values = np.asarray(values, dtype=float)
            bound = (values[0] + c * eps**rate) * np.exp(c * times)
            worst = max(worst, float(np.max(values - bound)))
        return worst

    return _smallest_admissible(excess, 0.0, c_max)
