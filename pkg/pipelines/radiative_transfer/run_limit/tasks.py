# -*- coding: utf-8 -*-
"""
Tasks for a run of the nonlinear diffusion limit.
"""
import json
from pathlib import Path

import pandas as pd
from prefect import task
from prefeitura_rio.pipelines_utils.logging import log

from pipelines.constants import constants
from pipelines.radiative_transfer.models.core import LimitState
from pipelines.radiative_transfer.models.diagnostics import limit_energy
from pipelines.radiative_transfer.models.limit_solver import limit_advance
from pipelines.radiative_transfer.utils.io import SnapshotWriter, write_csv
from pipelines.radiative_transfer.utils.problem import Problem


@task
def task_simulate_limit(problem: Problem, output_dir: str) -> dict:
    """
    Integrates the limit equation to `t_end` with step `limit_dt` (default: the
    kinetic stable step), recording `limit_energy` rows every `record_every` steps.

    Returns:
        dict: final LimitState under "final_state" and the rows under "frame".
    """
    config = problem.config
    state = problem.limit_state()
    rows = [limit_energy(state)]
    writer = None
    if config.snapshot_every:
        writer = SnapshotWriter(
            Path(output_dir) / "snapshots", config.snapshot_every, problem.metadata()
        )
        writer.write(state, 0)

    step = 0

    def observer(new_state: LimitState):
        nonlocal step
        step += 1
        if step % config.record_every == 0:
            rows.append(limit_energy(new_state))
        if writer is not None:
            writer(new_state)

    final = limit_advance(
        state,
        config.t_end,
        problem.limit_dt(),
        problem.params,
        problem.boundary_data,
        observer,
        config.limit_solver,
    )
    if rows[-1]["time"] != final.time:
        rows.append(limit_energy(final))
    if writer is not None:
        writer.finish(final)
    log(f"Limit run finished at t={final.time} after {step} steps")
    return {
        "final_state": final,
        "frame": pd.DataFrame(rows, columns=constants.LIMIT_COLUMNS.value),
    }


@task
def task_write_limit_outputs(result: dict, problem: Problem, output_dir: str) -> dict:
    out = Path(output_dir)
    path = write_csv(result["frame"], out / "limit.csv", problem.config_hash)
    summary = {
        "scenario": problem.config.scenario,
        "config_hash": problem.config_hash,
        "final_time": result["final_state"].time,
        "files": {"limit": str(path)},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary
