# -*- coding: utf-8 -*-
"""
This module defines the Prefect flow running the invariant suites.
"""

from prefect import Parameter, unmapped
from prefect.run_configs import LocalRun
from prefect.storage import Local
from prefeitura_rio.pipelines_utils.custom import Flow

from pipelines.constants import constants
from pipelines.radiative_transfer.selftest.tasks import (
    task_list_suites,
    task_run_suite,
    task_write_selftest_report,
)
from pipelines.utils.state_handlers import handler_save_traceback_on_failure

with Flow(
    name="RADIATIVE: Selftest",
    state_handlers=[handler_save_traceback_on_failure],
) as selftest_flow:
    out = Parameter("out", default=None)
    seed = Parameter("seed", default=None)
    suites = Parameter("suites", default=None)

    names = task_list_suites(only=suites)
    results = task_run_suite.map(name=names, seed=unmapped(seed))

    report = task_write_selftest_report(results=results, names=names, out=out)

selftest_flow.storage = Local()
selftest_flow.run_config = LocalRun(labels=[constants.RADIATIVE_AGENT_LABEL.value])
