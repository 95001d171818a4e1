# -*- coding: utf-8 -*-
"""
This module defines the Prefect flow for an epsilon-rate study.
"""

from prefect import Parameter, unmapped
from prefect.run_configs import LocalRun
from prefect.storage import Local
from prefeitura_rio.pipelines_utils.custom import Flow

from pipelines.constants import constants
from pipelines.radiative_transfer.rate_study.tasks import (
    task_plan_sweep,
    task_run_limit_reference,
    task_run_member,
    task_write_rate_report,
)
from pipelines.utils.state_handlers import handler_save_traceback_on_failure
from pipelines.utils.tasks import task_load_config, task_prepare_output_dir

with Flow(
    name="RADIATIVE: Rate study",
    state_handlers=[handler_save_traceback_on_failure],
) as rate_study_flow:
    config_path = Parameter("config_path")
    out = Parameter("out", default=None)
    epsilon = Parameter("epsilon", default=None)
    seed = Parameter("seed", default=None)

    sweep = task_load_config(
        config_path=config_path, kind="sweep", epsilon=epsilon, seed=seed, out=out
    )
    output_dir = task_prepare_output_dir(config=sweep)

    plan = task_plan_sweep(sweep=sweep, config_path=config_path)
    reference = task_run_limit_reference(sweep=sweep, plan=plan, config_path=config_path)

    # one kinetic run per epsilon; members run in parallel under a Dask executor
    members = task_run_member.map(
        epsilon=plan["epsilons"],
        sweep=unmapped(sweep),
        plan=unmapped(plan),
        reference=unmapped(reference),
        config_path=unmapped(config_path),
    )

    report = task_write_rate_report(
        members=members, sweep=sweep, plan=plan, output_dir=output_dir
    )

rate_study_flow.storage = Local()
rate_study_flow.run_config = LocalRun(labels=[constants.RADIATIVE_AGENT_LABEL.value])
