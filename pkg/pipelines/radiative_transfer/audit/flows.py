# -*- coding: utf-8 -*-
"""
This module defines the Prefect flow auditing a run from its snapshots.
"""

from prefect import Parameter
from prefect.run_configs import LocalRun
from prefect.storage import Local
from prefeitura_rio.pipelines_utils.custom import Flow

from pipelines.constants import constants
from pipelines.radiative_transfer.audit.tasks import (
    task_audit_snapshots,
    task_read_snapshots,
    task_rebuild_problem,
    task_write_audit_outputs,
)
from pipelines.utils.state_handlers import handler_save_traceback_on_failure

with Flow(
    name="RADIATIVE: Snapshot audit",
    state_handlers=[handler_save_traceback_on_failure],
) as audit_flow:
    snapshot_dir = Parameter("snapshot_dir")
    config_path = Parameter("config_path", default=None)
    out = Parameter("out", default=None)

    snapshots = task_read_snapshots(snapshot_dir=snapshot_dir)
    problem = task_rebuild_problem(snapshots=snapshots, config_path=config_path)
    result = task_audit_snapshots(snapshots=snapshots, problem=problem)

    outputs = task_write_audit_outputs(
        result=result, problem=problem, snapshot_dir=snapshot_dir, out=out
    )

audit_flow.storage = Local()
audit_flow.run_config = LocalRun(labels=[constants.RADIATIVE_AGENT_LABEL.value])
