# -*- coding: utf-8 -*-
"""
Tasks for epsilon-rate studies: one shared limit run, one kinetic run per
epsilon with well-prepared data, and the rate report.
"""
import json
from dataclasses import asdict
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from prefect import task
from prefect.engine import signals
from prefect.triggers import all_finished
from prefeitura_rio.pipelines_utils.logging import log

from pipelines.constants import constants
from pipelines.radiative_transfer.models.config import SweepConfig, config_hash
from pipelines.radiative_transfer.models.core import BoundaryMode, Params
from pipelines.radiative_transfer.models.diagnostics import (
    corrected_psibar,
    expansion_residual,
    fit_gronwall_constant,
    fit_rate,
    predicted_rate,
    relative_entropy,
)
from pipelines.radiative_transfer.models.kinetic_solver import advance, stable_dt
from pipelines.radiative_transfer.models.limit_solver import LimitHistory, limit_advance
from pipelines.radiative_transfer.utils.io import write_csv
from pipelines.radiative_transfer.utils.problem import build_problem


def default_rate_band(params: Params) -> Optional[Tuple[float, float]]:
    """Acceptance band around the predicted rate; None for Robin with r = 0."""
    if params.bc_mode == BoundaryMode.TORUS:
        return (1.5, 2.5)
    if params.bc_mode == BoundaryMode.ROBIN and params.robin_r == 0:
        return None
    s = predicted_rate(params)
    return (0.6, 1.6) if s >= 1.0 else (s - 0.2, s + 0.3)


def _base_dir(config_path: Optional[str]) -> Optional[Path]:
    return Path(config_path).resolve().parent if config_path else None


def plan_sweep(sweep: SweepConfig, config_path: Optional[str] = None) -> dict:
    """
    Step sizes shared by all members: the kinetic step is the stable step at the
    smallest epsilon, the limit step defaults to it.
    """
    times = sweep.times()
    plan = {
        "epsilons": list(sweep.epsilon_list),
        "sample_times": times,
        "entropy_times": [0.0] + times,
        "kinetic_dt": None,
        "limit_dt": None,
    }
    if sweep.synthetic is not None:
        return plan
    smallest = sweep.base.with_epsilon(min(sweep.epsilon_list))
    problem = build_problem(smallest, _base_dir(config_path))
    kinetic_dt = sweep.base.solver.dt_override or stable_dt(
        problem.grid, problem.quad, problem.params, sweep.base.solver
    )
    plan["kinetic_dt"] = kinetic_dt
    plan["limit_dt"] = sweep.limit_dt or sweep.base.limit_dt or kinetic_dt
    log(f"Sweep plan: kinetic dt={kinetic_dt:.6g}, limit dt={plan['limit_dt']:.6g}")
    return plan


def run_limit_reference(
    sweep: SweepConfig, plan: dict, config_path: Optional[str] = None
) -> Optional[LimitHistory]:
    """
    Shared limit run over [0, t_end], advanced segment by segment so every
    sample time is a stored level. Only levels within 2.5 steps of an entropy
    time are kept.
    """
    if sweep.synthetic is not None:
        return None
    problem = build_problem(sweep.base, _base_dir(config_path))
    dt = plan["limit_dt"]
    targets = np.asarray(plan["entropy_times"])
    history = LimitHistory(problem.grid)
    state = problem.limit_state()
    history.append(state)

    def keep(new_state):
        if np.min(np.abs(targets - new_state.time)) <= 2.5 * dt:
            history.append(new_state)

    for t in plan["sample_times"]:
        state = limit_advance(
            state, t, dt, problem.params, problem.boundary_data, keep, sweep.base.limit_solver
        )
    # two levels past the last sample give its time derivative a central stencil
    horizon = max(sweep.base.t_end, plan["sample_times"][-1]) + 2 * dt
    state = limit_advance(
        state, horizon, dt, problem.params, problem.boundary_data, keep, sweep.base.limit_solver
    )
    t_min = float(min(np.min(T) for T in history.temperatures))
    log(f"Limit reference kept {len(history)} levels, min temperature {t_min:.6g}")
    if t_min <= 0:
        log("Limit temperature touches zero; entropy positivity is not guaranteed", level="warning")
    return history


def run_member(
    epsilon: float,
    sweep: SweepConfig,
    plan: dict,
    reference: Optional[LimitHistory],
    config_path: Optional[str] = None,
) -> dict:
    """
    Kinetic run at `epsilon` compared with the limit reference at every entropy time.

    Returns:
        dict: epsilon, per-time entropy rows, the final error
        ||T - Tbar||_4^4 + ||psi - psibar||_2^2 and the expansion residuals at t_end.
    """
    if sweep.synthetic is not None:
        error = sweep.synthetic.constant * epsilon**sweep.synthetic.rate
        rows = [
            {
                "time": t,
                "H": float("nan"),
                "H_T_part": float("nan"),
                "H_psi_part": float("nan"),
                "error_L4_4": error,
                "error_L2_2": 0.0,
            }
            for t in plan["sample_times"]
        ]
        return {"epsilon": epsilon, "entropy": rows, "error": error, "expansion": {}}

    solver = sweep.base.solver.model_copy(update={"dt_override": plan["kinetic_dt"]})
    config = sweep.base.with_epsilon(epsilon).model_copy(update={"solver": solver})
    problem = build_problem(config, _base_dir(config_path))
    state = problem.kinetic_state()
    rows = []
    for t in plan["entropy_times"]:
        if t > state.time:
            state = advance(
                state, t, problem.params, solver, problem.quad, problem.boundary_data
            )
        psibar = corrected_psibar(reference, epsilon, problem.quad, time=t)
        limit_temperature = reference.state(t).temperature
        record = relative_entropy(state, limit_temperature, psibar, problem.quad)
        if record.H < 0:
            log(f"Negative relative entropy {record.H:.3e} at eps={epsilon}, t={t}", "warning")
        rows.append(asdict(record))

    expansion = {
        f"order{order}": expansion_residual(state, reference, epsilon, problem.quad, order)
        for order in (0, 1, 2)
    }
    error = rows[-1]["error_L4_4"] + rows[-1]["error_L2_2"]
    log(f"eps={epsilon}: error {error:.6e}, H={rows[-1]['H']:.6e}")
    return {"epsilon": epsilon, "entropy": rows, "error": error, "expansion": expansion}


def assemble_rate_report(members: List, sweep: SweepConfig, plan: dict) -> dict:
    """Fits the observed rate over the successful members; failed ones are listed."""
    params = sweep.base.params
    succeeded = [m for m in members if isinstance(m, dict)]
    failed = [
        {"epsilon": eps, "error": str(m)}
        for eps, m in zip(plan["epsilons"], members)
        if not isinstance(m, dict)
    ]
    s = predicted_rate(params)
    band = tuple(sweep.rate_band) if sweep.rate_band else default_rate_band(params)
    if sweep.synthetic is not None:
        s = sweep.synthetic.rate

    report = {
        "scenario": sweep.base.scenario,
        "config_hash": config_hash(sweep),
        "regime": params.bc_mode.value,
        "robin_r": params.robin_r if params.bc_mode == BoundaryMode.ROBIN else None,
        "alpha": params.alpha,
        "synthetic": sweep.synthetic is not None,
        "predicted_rate": sweep.expected_rate if sweep.expected_rate is not None else s,
        "rate_band": list(band) if band else None,
        "kinetic_dt": plan["kinetic_dt"],
        "limit_dt": plan["limit_dt"],
        "sample_times": plan["sample_times"],
        "errors": {str(m["epsilon"]): m["error"] for m in succeeded},
        "expansion_residuals": {str(m["epsilon"]): m["expansion"] for m in succeeded},
        "failed_members": failed,
        "slope": None,
        "intercept": None,
        "r_squared": None,
        "passed": None,
        "gronwall_constant": None,
    }
    pairs = [(m["epsilon"], m["error"]) for m in succeeded if m["error"] > 0]
    if len(pairs) >= 3:
        fit = fit_rate(pairs)
        report.update(slope=fit.slope, intercept=fit.intercept, r_squared=fit.r_squared)
        if band is not None:
            report["passed"] = bool(band[0] <= fit.slope <= band[1])
    else:
        log(f"Only {len(pairs)} usable members; no rate fitted", level="warning")

    if sweep.synthetic is None and succeeded:
        series = [
            (m["epsilon"], [r["time"] for r in m["entropy"]], [r["H"] for r in m["entropy"]])
            for m in succeeded
        ]
        report["gronwall_constant"] = fit_gronwall_constant(series, s)
        report["min_entropy"] = float(min(r["H"] for m in succeeded for r in m["entropy"]))
    return report


def rate_frames(members: List) -> Tuple[pd.DataFrame, pd.DataFrame]:
    succeeded = [m for m in members if isinstance(m, dict)]
    errors = pd.DataFrame(
        [
            {
                "epsilon": m["epsilon"],
                "error": m["error"],
                "error_L4_4": m["entropy"][-1]["error_L4_4"],
                "error_L2_2": m["entropy"][-1]["error_L2_2"],
                "H": m["entropy"][-1]["H"],
            }
            for m in succeeded
        ],
        columns=["epsilon", "error", "error_L4_4", "error_L2_2", "H"],
    )
    entropy = pd.DataFrame(
        [dict(epsilon=m["epsilon"], **row) for m in succeeded for row in m["entropy"]],
        columns=["epsilon"] + constants.ENTROPY_COLUMNS.value,
    )
    return errors, entropy


@task
def task_plan_sweep(sweep: SweepConfig, config_path: Optional[str] = None) -> dict:
    return plan_sweep(sweep, config_path)


@task
def task_run_limit_reference(
    sweep: SweepConfig, plan: dict, config_path: Optional[str] = None
) -> Optional[LimitHistory]:
    return run_limit_reference(sweep, plan, config_path)


@task
def task_run_member(
    epsilon: float,
    sweep: SweepConfig,
    plan: dict,
    reference: Optional[LimitHistory],
    config_path: Optional[str] = None,
) -> dict:
    return run_member(epsilon, sweep, plan, reference, config_path)


@task(trigger=all_finished)
def task_write_rate_report(members: List, sweep: SweepConfig, plan: dict, output_dir: str) -> dict:
    """
    Writes rate_errors.csv, entropy.csv and rate_report.json from whatever members
    finished.

    Raises:
        signals.FAIL: after writing, if any member failed.
    """
    out = Path(output_dir)
    report = assemble_rate_report(members, sweep, plan)
    errors, entropy = rate_frames(members)
    write_csv(errors, out / "rate_errors.csv", report["config_hash"])
    write_csv(entropy, out / "entropy.csv", report["config_hash"])
    (out / "rate_report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    log(
        f"Rate study {report['scenario']}: slope={report['slope']}, "
        f"predicted={report['predicted_rate']}, band={report['rate_band']}"
    )
    if report["failed_members"]:
        raise signals.FAIL(
            f"{len(report['failed_members'])} sweep members failed: {report['failed_members']}"
        )
    return report
