# -*- coding: utf-8 -*-
"""
This module defines the Prefect flow for a run of the diffusion limit equation.
"""

from prefect import Parameter
from prefect.run_configs import LocalRun
from prefect.storage import Local
from prefeitura_rio.pipelines_utils.custom import Flow

from pipelines.constants import constants
from pipelines.radiative_transfer.run_kinetic.tasks import task_build_problem
from pipelines.radiative_transfer.run_limit.tasks import (
    task_simulate_limit,
    task_write_limit_outputs,
)
from pipelines.utils.state_handlers import handler_save_traceback_on_failure
from pipelines.utils.tasks import task_load_config, task_prepare_output_dir

with Flow(
    name="RADIATIVE: Limit run",
    state_handlers=[handler_save_traceback_on_failure],
) as run_limit_flow:
    config_path = Parameter("config_path")
    out = Parameter("out", default=None)
    epsilon = Parameter("epsilon", default=None)
    seed = Parameter("seed", default=None)

    config = task_load_config(
        config_path=config_path, kind="run", epsilon=epsilon, seed=seed, out=out
    )
    output_dir = task_prepare_output_dir(config=config)

    problem = task_build_problem(config=config, config_path=config_path)

    result = task_simulate_limit(problem=problem, output_dir=output_dir)

    outputs = task_write_limit_outputs(result=result, problem=problem, output_dir=output_dir)

run_limit_flow.storage = Local()
run_limit_flow.run_config = LocalRun(labels=[constants.RADIATIVE_AGENT_LABEL.value])
