# -*- coding: utf-8 -*-
"""
Tasks for a single kinetic run: build the problem, integrate with energy and
snapshot observers, audit the energy inequality and write the result files.
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import pandas as pd
from prefect import task
from prefeitura_rio.pipelines_utils.logging import log

from pipelines.radiative_transfer.models.config import RunConfig
from pipelines.radiative_transfer.models.core import KineticState
from pipelines.radiative_transfer.models.diagnostics import (
    EnergyAudit,
    EnergyMonitor,
    energy_audit,
)
from pipelines.radiative_transfer.models.kinetic_solver import advance, galerkin_advance
from pipelines.radiative_transfer.utils.io import SnapshotWriter, write_csv
from pipelines.radiative_transfer.utils.problem import Problem, build_problem


@dataclass
class KineticRunResult:
    final_state: KineticState
    energy: pd.DataFrame
    steps: pd.DataFrame
    audit: EnergyAudit
    snapshots: list


@task
def task_build_problem(config: RunConfig, config_path: Optional[str] = None) -> Problem:
    """
    Resolves grid, quadrature, initial profile and boundary data of a run.

    Relative file paths inside the config are resolved against the config's directory.
    """
    base_dir = Path(config_path).resolve().parent if config_path else None
    problem = build_problem(config, base_dir)
    log(
        f"Scenario {config.scenario}: {problem.grid.dim}D grid {problem.grid.shape}, "
        f"{problem.quad.n_nodes} ordinates, eps={problem.params.epsilon}, "
        f"bc={problem.params.bc_mode.value}, hash={problem.config_hash[:12]}"
    )
    return problem


def simulate_kinetic(problem: Problem, output_dir: Optional[str] = None) -> KineticRunResult:
    config = problem.config
    state = problem.kinetic_state()
    monitor = EnergyMonitor(
        problem.quad, problem.params, problem.boundary_data, config.record_every
    )
    monitor.start(state)
    writer = None
    if output_dir is not None and config.snapshot_every:
        writer = SnapshotWriter(
            Path(output_dir) / "snapshots", config.snapshot_every, problem.metadata()
        )
        writer.write(state, 0)

    def observer(new_state, report):
        monitor(new_state, report)
        if writer is not None:
            writer(new_state, report)

    if config.solver.galerkin_modes is not None:
        final = galerkin_advance(
            state, config.t_end, problem.params, config.solver, problem.quad, observer
        )
    else:
        final = advance(
            state,
            config.t_end,
            problem.params,
            config.solver,
            problem.quad,
            problem.boundary_data,
            observer,
        )
    monitor.finish()
    if writer is not None:
        writer.finish(final)

    audit = energy_audit(monitor.records, problem.params)
    clamped = sum(r.clamped_cells for r in monitor.reports)
    if clamped:
        log(f"{clamped} cell clamps happened during the run", level="warning")
    log(
        f"Kinetic run finished at t={final.time}: {len(monitor.reports)} steps, "
        f"max audit residual {audit.max_residual:.3e}"
    )
    return KineticRunResult(
        final_state=final,
        energy=monitor.energy_frame(),
        steps=monitor.step_frame(),
        audit=audit,
        snapshots=[str(p) for p in (writer.paths if writer else [])],
    )


@task
def task_simulate_kinetic(problem: Problem, output_dir: str) -> KineticRunResult:
    """
    Integrates the kinetic system to `t_end`, recording energies every
    `record_every` steps and snapshots every `snapshot_every` steps.

    Raises:
        StabilityError, ConvergenceError: from the solver sub-steps.
    """
    return simulate_kinetic(problem, output_dir)


@task
def task_write_kinetic_outputs(
    result: KineticRunResult, problem: Problem, output_dir: str
) -> dict:
    out = Path(output_dir)
    paths = {
        "energy": str(write_csv(result.energy, out / "energy.csv", problem.config_hash)),
        "steps": str(write_csv(result.steps, out / "steps.csv", problem.config_hash)),
    }
    summary = {
        "scenario": problem.config.scenario,
        "config_hash": problem.config_hash,
        "final_time": result.final_state.time,
        "regime": result.audit.regime.value,
        "max_audit_residual": result.audit.max_residual,
        "growth_constant": result.audit.growth_constant,
        "nonnegative_terms": result.audit.nonnegative,
        "negative_terms": result.audit.negative_terms,
        "snapshots": result.snapshots,
        "files": paths,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary
