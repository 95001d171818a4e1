# -*- coding: utf-8 -*-
"""
Desk-scale reproduction runs: energy audits under refinement, epsilon-rate
studies per boundary regime, expansion orders and determinism.
Run with `pytest -m slow`.
"""
from pathlib import Path

import numpy as np
import pytest
from typer.testing import CliRunner

from pipelines.cli import app
from pipelines.radiative_transfer.models.config import (
    RunConfig,
    SweepConfig,
    load_config,
)
from pipelines.radiative_transfer.rate_study.tasks import (
    assemble_rate_report,
    plan_sweep,
    run_limit_reference,
    run_member,
)
from pipelines.radiative_transfer.run_kinetic.tasks import simulate_kinetic
from pipelines.radiative_transfer.utils.io import read_csv
from pipelines.radiative_transfer.utils.problem import build_problem

pytestmark = pytest.mark.slow

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def with_cells(config: RunConfig, cells: int) -> RunConfig:
    grid = config.grid.model_copy(update={"cells": [cells] * config.grid.dim})
    return RunConfig.model_validate(dict(config.model_dump(), grid=grid.model_dump()))


def rate_study(name: str, epsilons=None) -> dict:
    path = CONFIG_DIR / name
    sweep = load_config(path, SweepConfig)
    if epsilons is not None:
        sweep = SweepConfig.model_validate(dict(sweep.model_dump(), epsilon_list=epsilons))
    plan = plan_sweep(sweep, str(path))
    reference = run_limit_reference(sweep, plan, str(path))
    members = [run_member(eps, sweep, plan, reference, str(path)) for eps in plan["epsilons"]]
    return {"report": assemble_rate_report(members, sweep, plan), "members": members}


@pytest.fixture(scope="module")
def torus_study():
    return rate_study("torus_rate.yaml")


def test_energy_audit_tightens_under_refinement():
    base = load_config(CONFIG_DIR / "torus_smooth.yaml")
    residuals = []
    for cells in (64, 128):
        result = simulate_kinetic(build_problem(with_cells(base, cells)))
        assert result.audit.nonnegative
        residuals.append(max(result.audit.max_residual, 0.0))
    coarse, fine = residuals
    assert fine == 0.0 or fine <= coarse / 1.5


def test_equilibrium_run_keeps_energy_constant(tmp_path):
    args = ["run-kinetic", "--config", str(CONFIG_DIR / "equilibrium.yaml"), "--out", str(tmp_path)]
    result = CliRunner().invoke(app, args)
    assert result.exit_code == 0, result.output
    energy = read_csv(tmp_path / "energy.csv")
    for column in ("energy_T5", "energy_psi2"):
        values = energy[column].to_numpy()
        assert np.max(np.abs(values - values[0])) <= 1e-12
    assert len(read_csv(tmp_path / "steps.csv")) == 500


def test_reruns_are_bit_identical(tmp_path):
    args = ["run-kinetic", "--config", str(CONFIG_DIR / "equilibrium.yaml"), "--out", str(tmp_path)]
    runner = CliRunner()
    assert runner.invoke(app, args).exit_code == 0
    first = (tmp_path / "energy.csv").read_bytes()
    assert runner.invoke(app, args).exit_code == 0
    assert (tmp_path / "energy.csv").read_bytes() == first


def test_torus_rate(torus_study):
    report = torus_study["report"]
    assert report["predicted_rate"] == 2.0
    assert 1.5 <= report["slope"] <= 2.5
    assert report["passed"] is True


def test_torus_temperature_error_shrinks_with_eps(torus_study):
    by_eps = {m["epsilon"]: m["entropy"][-1] for m in torus_study["members"]}
    assert by_eps[0.1]["error_L4_4"] < by_eps[0.2]["error_L4_4"]
    assert by_eps[0.1]["error_L2_2"] < by_eps[0.2]["error_L2_2"]


def test_torus_entropy_positivity_and_gronwall_shape(torus_study):
    report = torus_study["report"]
    assert report["min_entropy"] >= 0
    assert report["gronwall_constant"] <= 1e3


@pytest.mark.parametrize(
    "name, band",
    [
        ("dirichlet_rate.yaml", (0.6, 1.6)),
        ("robin_r05_rate.yaml", (0.3, 0.8)),
        ("robin_r2_rate.yaml", (0.6, 1.6)),
    ],
)
def test_bounded_domain_rates(name, band):
    report = rate_study(name)["report"]
    assert report["rate_band"] == pytest.approx(list(band))
    assert band[0] <= report["slope"] <= band[1]


def test_robin_without_rate_reports_slope_only():
    report = rate_study("robin_r0_rate.yaml")["report"]
    assert report["rate_band"] is None
    assert report["passed"] is None
    assert np.isfinite(report["slope"])


def test_expansion_residual_orders():
    members = rate_study("torus_rate.yaml", epsilons=[0.4, 0.2, 0.1])["members"]
    by_eps = {m["epsilon"]: m["expansion"] for m in members}
    ratio0 = by_eps[0.2]["order0"] / by_eps[0.1]["order0"]
    ratio1 = by_eps[0.2]["order1"] / by_eps[0.1]["order1"]
    assert 1.6 <= ratio0 <= 2.4
    assert 3.0 <= ratio1 <= 5.0


def test_galerkin_run_satisfies_energy_audit():
    problem = build_problem(load_config(CONFIG_DIR / "galerkin.yaml"))
    result = simulate_kinetic(problem)
    audit = result.audit
    assert audit.nonnegative
    assert audit.max_residual <= 1e-2 * abs(audit.lhs[0])
