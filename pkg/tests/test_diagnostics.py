# -*- coding: utf-8 -*-
import numpy as np
import pytest

from pipelines.radiative_transfer.models.core import (
    BoundaryData,
    BoundaryMode,
    IntensityField,
    KineticState,
    LimitState,
    Params,
    TemperatureField,
    make_grid,
    well_prepared_init,
)
from pipelines.radiative_transfer.models.diagnostics import (
    EnergyMonitor,
    EnergyRecord,
    boundary_outflow,
    boundary_robin,
    corrected_psibar,
    dissipation_grad,
    dissipation_relax,
    energy,
    energy_audit,
    energy_record,
    expansion_residual,
    fit_gronwall_constant,
    fit_rate,
    limit_energy,
    lmtg_check,
    predicted_rate,
    relative_entropy,
    remainder_Rbar,
    remainder_Rbar_definition,
    split_norms,
)
from pipelines.radiative_transfer.models.kinetic_solver import KineticSolverConfig, advance
from pipelines.radiative_transfer.models.limit_solver import LimitHistory

FOUR_PI = 4.0 * np.pi


def uniform(grid, quad, value=1.3):
    return well_prepared_init(TemperatureField(grid, np.full(grid.shape, value)), quad.n_nodes)


def steady_history(temperature, times=(0.0, 0.01, 0.02)):
    history = LimitHistory(temperature.grid)
    for t in times:
        history.append(LimitState(t, temperature))
    return history


def records(times, **columns):
    defaults = dict(energy_T5=1.0, energy_psi2=0.0, dissipation_grad=0.0, dissipation_relax=0.0)
    rows = []
    for i, t in enumerate(times):
        values = {k: (v[i] if np.ndim(v) else v) for k, v in {**defaults, **columns}.items()}
        rows.append(EnergyRecord(time=t, **values))
    return rows


def test_energy_at_equilibrium(torus_1d, quad):
    state = uniform(torus_1d, quad)
    energy_T5, energy_psi2 = energy(state, quad)
    assert energy_T5 == pytest.approx(1.3**5 / 5.0)
    assert energy_psi2 == pytest.approx(FOUR_PI * 1.3**8 / 2.0)
    assert dissipation_grad(state.temperature) == 0.0
    assert dissipation_relax(state, quad, Params(epsilon=0.1)) == 0.0


def test_dissipations_are_positive_off_equilibrium(smooth_state, quad, torus_params):
    assert dissipation_grad(smooth_state.temperature) > 0
    psi = IntensityField(smooth_state.grid, smooth_state.intensity.values + 0.1)
    shifted = KineticState(0.0, smooth_state.temperature, psi)
    expected = FOUR_PI * 0.01 / torus_params.epsilon**2
    assert dissipation_relax(shifted, quad, torus_params) == pytest.approx(expected)


def test_boundary_terms(box_1d, quad, dirichlet_params, unit_boundary):
    state = uniform(box_1d, quad, value=1.0)
    assert boundary_outflow(state, quad, dirichlet_params, unit_boundary) == 0.0
    assert boundary_outflow(state, quad, dirichlet_params, None) == 0.0
    assert boundary_robin(state, dirichlet_params, unit_boundary) == 0.0

    hot = uniform(box_1d, quad, value=1.2)
    assert boundary_outflow(hot, quad, dirichlet_params, unit_boundary) > 0
    robin = Params(epsilon=0.2, bc_mode=BoundaryMode.ROBIN, robin_r=1.0)
    assert boundary_robin(hot, robin, unit_boundary) > 0


def test_energy_record_of_torus_state(smooth_state, quad, torus_params):
    record = energy_record(smooth_state, quad, torus_params)
    assert record.time == 0.0
    assert record.boundary_outflow == 0.0 and record.boundary_robin == 0.0
    assert np.isnan(record.residual)


def test_torus_audit_of_dissipating_series(torus_params):
    times = np.linspace(0.0, 1.0, 11)
    series = records(times, energy_T5=1.0 - times, dissipation_relax=0.5)
    audit = energy_audit(series, torus_params)
    assert audit.regime == BoundaryMode.TORUS
    assert audit.growth_constant is None
    assert np.allclose(audit.rhs, 1.0)
    assert audit.residual[0] == 0.0
    assert audit.max_residual == 0.0
    assert audit.passed()
    assert series[-1].residual == pytest.approx(-0.5)


def test_torus_audit_flags_energy_creation(torus_params):
    times = np.linspace(0.0, 1.0, 11)
    audit = energy_audit(records(times, energy_T5=1.0 - times, dissipation_relax=2.0), torus_params)
    assert audit.max_residual == pytest.approx(1.0)
    assert not audit.passed(1e-12)


def test_torus_audit_weights_gradient_dissipation(torus_params):
    times = np.linspace(0.0, 1.0, 5)
    audit = energy_audit(records(times, dissipation_grad=1.0), torus_params)
    assert audit.lhs[-1] == pytest.approx(1.0 + 16.0 / 25.0)


def test_bounded_audit_fits_growth_constant(dirichlet_params):
    times = np.linspace(0.0, 1.0, 21)
    steady = energy_audit(records(times), dirichlet_params)
    assert steady.growth_constant == 1.0
    assert steady.lhs[0] == pytest.approx(5.0)
    assert steady.passed()

    growing = energy_audit(records(times, energy_T5=np.exp(3.0 * times) / 5.0), dirichlet_params)
    assert 1.0 < growing.growth_constant < 3.0
    assert growing.max_residual <= 1e-9


def test_bounded_audit_without_finite_constant(dirichlet_params):
    times = np.linspace(0.0, 1.0, 3)
    audit = energy_audit(
        records(times, energy_T5=[1.0, 1e6, 1e6]), dirichlet_params, c_max=2.0
    )
    assert audit.growth_constant == float("inf")
    assert not audit.passed(1e300)


def test_audit_reports_negative_terms(torus_params):
    audit = energy_audit(records([0.0, 1.0], dissipation_relax=[0.0, -1.0]), torus_params)
    assert audit.negative_terms == ["dissipation_relax"]
    assert not audit.passed(10.0)


def test_audit_rejects_bad_series(torus_params):
    with pytest.raises(ValueError):
        energy_audit([], torus_params)
    with pytest.raises(ValueError):
        energy_audit(records([0.0, 0.2, 0.1]), torus_params)


def test_limit_energy(torus_1d):
    state = LimitState(0.5, TemperatureField(torus_1d, np.full(32, 2.0)))
    summary = limit_energy(state)
    assert summary["time"] == 0.5
    assert summary["energy_T5"] == pytest.approx(32.0 / 5.0)
    assert summary["conserved_u"] == pytest.approx(2.0 + FOUR_PI * 16.0)
    assert summary["t_min"] == summary["t_max"] == 2.0


def test_corrected_psibar(torus_1d, quad, make_sine):
    T = make_sine(torus_1d)
    history = steady_history(T)
    leading = corrected_psibar(history, 0.0, quad)
    assert np.array_equal(leading.values, np.repeat(T.values[:, None] ** 4, quad.n_nodes, axis=1))

    flat = steady_history(TemperatureField(torus_1d, np.full(32, 1.3)))
    assert np.allclose(corrected_psibar(flat, 0.1, quad).values, 1.3**4, rtol=0.0, atol=1e-14)

    corrected = corrected_psibar(history, 0.1, quad, time=0.01)
    assert not np.allclose(corrected.values, leading.values)
    with pytest.raises(ValueError):
        corrected_psibar(history, -0.1, quad)
    with pytest.raises(ValueError):
        corrected_psibar(steady_history(T, times=(0.0,)), 0.1, quad)


def test_remainder_variants_on_steady_history(torus_1d, quad, make_sine):
    history = steady_history(make_sine(torus_1d))
    displayed = remainder_Rbar(history, 0.1, quad, variant="displayed")
    assert np.all(displayed.values == 0.0)
    derived = remainder_Rbar(history, 0.1, quad, variant="derived")
    assert np.max(np.abs(derived.values)) > 0
    with pytest.raises(ValueError):
        remainder_Rbar(history, 0.1, quad, variant="other")


def linear_in_time_history(cells, times=(0.0, 0.01, 0.02, 0.03, 0.04)):
    grid = make_grid(1, [cells], [1.0], [True])
    x = grid.centers(0)
    history = LimitHistory(grid)
    for t in times:
        f = 2.0 + 0.5 * np.sin(2.0 * np.pi * x) + 0.3 * t * np.cos(2.0 * np.pi * x)
        history.append(LimitState(t, TemperatureField(grid, f**0.25)))
    return history


def test_derived_remainder_matches_defining_residual_under_refinement(quad):
    gaps = []
    for cells in (32, 64, 128):
        history = linear_in_time_history(cells)
        derived = remainder_Rbar(history, 0.1, quad, time=0.02, variant="derived")
        defining = remainder_Rbar_definition(history, 0.1, quad, time=0.02)
        gaps.append(np.max(np.abs(derived.values - defining.values)))
    orders = np.log2(np.asarray(gaps[:-1]) / np.asarray(gaps[1:]))
    assert np.all(orders >= 1.8)
    with pytest.raises(ValueError):
        remainder_Rbar_definition(history, 0.0, quad, time=0.02)


def test_relative_entropy(torus_1d, quad, make_sine):
    T = make_sine(torus_1d)
    psibar = corrected_psibar(steady_history(T), 0.0, quad)
    kin = well_prepared_init(T, quad.n_nodes)
    record = relative_entropy(kin, T, psibar, quad)
    assert record.H == 0.0
    assert record.error == 0.0

    warmer = well_prepared_init(TemperatureField(torus_1d, T.values + 0.1), quad.n_nodes)
    record = relative_entropy(warmer, T, psibar, quad)
    assert record.H_T_part > 0 and record.H_psi_part > 0
    assert record.H == pytest.approx(record.H_T_part + record.H_psi_part)
    assert record.error_L4_4 == pytest.approx(1e-4)


def test_relative_entropy_checks(torus_1d, box_1d, quad, make_sine):
    T = make_sine(torus_1d)
    psibar = corrected_psibar(steady_history(T), 0.0, quad)
    kin = well_prepared_init(T, quad.n_nodes)
    with pytest.raises(ValueError):
        relative_entropy(kin, TemperatureField(box_1d, T.values), psibar, quad)
    with pytest.raises(ValueError):
        relative_entropy(kin, TemperatureField(torus_1d, -T.values), psibar, quad)


def test_lmtg_check():
    rng = np.random.default_rng(11)
    c = rng.uniform(0.05, 1.0, 5000)
    A = c + rng.uniform(0.0, 2.0, 5000)
    g = rng.uniform(-1.0, 1.0, 5000) * A + rng.uniform(0.0, 2.0, 5000)
    g = np.maximum(g, -A)
    passed, margin = lmtg_check(A, g, c)
    assert passed.all()
    assert np.all(margin >= 0)

    ok, margin = lmtg_check(1.0, 0.0, 1.0)
    assert ok and margin == 0.0
    with pytest.raises(ValueError):
        lmtg_check(0.5, 0.1, 1.0)
    with pytest.raises(ValueError):
        lmtg_check(1.0, -1.5, 0.5)
    with pytest.raises(ValueError):
        lmtg_check(1.0, 0.1, 0.0)


def test_expansion_residual(torus_1d, quad, make_sine):
    T = make_sine(torus_1d)
    history = steady_history(T)
    kin = well_prepared_init(T, quad.n_nodes)
    assert expansion_residual(kin, history, 0.1, quad, order=0) == 0.0
    assert expansion_residual(kin, history, 0.1, quad, order=1) > 0
    assert expansion_residual(kin, history, 0.1, quad, order=2) >= 0
    with pytest.raises(ValueError):
        expansion_residual(kin, history, 0.1, quad, order=3)
    with pytest.raises(ValueError):
        expansion_residual(kin, history, 0.1, quad, order=0, time=0.5)


def test_split_norms(box_1d, quad):
    values = np.ones((32, quad.n_nodes))
    values[0] = -5.0
    norms = split_norms(values, box_1d)
    assert norms == {"interior": 1.0, "full": 5.0}


@pytest.mark.parametrize(
    "params, rate",
    [
        (Params(epsilon=0.1), 2.0),
        (Params(epsilon=0.1, bc_mode="dirichlet"), 1.0),
        (Params(epsilon=0.1, bc_mode="robin", robin_r=0.5), 0.5),
        (Params(epsilon=0.1, bc_mode="robin", robin_r=2.0), 1.0),
    ],
)
def test_predicted_rate(params, rate):
    assert predicted_rate(params) == rate


def test_fit_rate():
    eps = np.array([0.4, 0.2, 0.1, 0.05])
    fit = fit_rate(zip(eps, 3.0 * eps**2))
    assert fit.slope == pytest.approx(2.0)
    assert np.exp(fit.intercept) == pytest.approx(3.0)
    assert fit.r_squared == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fit_rate([(0.1, 1.0), (0.2, 2.0)])
    with pytest.raises(ValueError):
        fit_rate([(0.1, 1.0), (0.2, 0.0), (0.4, 2.0)])


def test_fit_gronwall_constant():
    flat = [(0.1, [0.0, 0.5, 1.0], [0.0, 0.0, 0.0])]
    assert fit_gronwall_constant(flat, 2.0) == 0.0

    growing = [(0.1, [0.0, 1.0], [0.0, 1.0])]
    C = fit_gronwall_constant(growing, 2.0)
    assert 3.0 < C < 4.0
    assert C * 0.01 * np.exp(C) == pytest.approx(1.0, rel=1e-6)
    assert fit_gronwall_constant(growing, 2.0, c_max=1.0) == float("inf")


def test_energy_monitor_stride(smooth_state, quad, torus_params):
    monitor = EnergyMonitor(quad, torus_params, record_every=3)
    monitor.start(smooth_state)
    config = KineticSolverConfig(dt_override=1e-3)
    advance(smooth_state, 0.011, torus_params, config, quad, observer=monitor)
    monitor.finish()
    assert len(monitor.reports) == 11
    assert [r.time for r in monitor.records] == pytest.approx([0.0, 0.003, 0.006, 0.009, 0.011])
    assert list(monitor.energy_frame().columns)[0] == "time"
    assert len(monitor.step_frame()) == 11
    monitor.finish()
    assert len(monitor.records) == 5
    with pytest.raises(ValueError):
        EnergyMonitor(quad, torus_params, record_every=0)


def test_energy_monitor_with_boundary(box_1d, quad, dirichlet_params):
    state = uniform(box_1d, quad, value=1.2)
    monitor = EnergyMonitor(quad, dirichlet_params, BoundaryData.constant(1.0))
    monitor.start(state)
    assert monitor.records[0].boundary_outflow > 0
