# -*- coding: utf-8 -*-
import traceback
from pathlib import Path
from textwrap import dedent

from prefect import Task, context
from prefect.engine import state

from pipelines.constants import constants


def error_log_dir() -> Path:
    """`<out>/error_logs` when the run has an `out` parameter, else the shared default."""
    out = (context.get("parameters") or {}).get("out")
    return Path(out) / "error_logs" if out else Path(constants.ERROR_LOG_DIR.value)


def handler_save_traceback_on_failure(obj, old_state, new_state):
    """Appends the traceback of a failed task or flow to `<error_log_dir>/<flow_run_id>.txt`."""
    if isinstance(new_state, state.Failed):
        result = new_state.result
        if isinstance(result, BaseException):
            exc_info = (type(result), result, result.__traceback__)
            full_traceback = "".join(traceback.format_exception(*exc_info))
        else:
            full_traceback = str(new_state.message)

        if "raise signals.TRIGGERFAIL" in full_traceback:
            return new_state

        task_name = obj.name if isinstance(obj, Task) else "Flow-level failure"
        trigger = getattr(obj, "trigger", None)
        error_description = dedent(
            f"""\

            Task name: {task_name}
            Trigger: {getattr(trigger, "__name__", "-")}

            Task message:
            {new_state.message}
            """
        )
        error_description += f"\n{full_traceback}\n"

        file_dir = error_log_dir()
        file_dir.mkdir(parents=True, exist_ok=True)
        file_name = f'{context.get("flow_run_id", "local")}.txt'

        with open(file_dir / file_name, "a") as f:
            f.write(error_description)
    return new_state
