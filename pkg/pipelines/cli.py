# -*- coding: utf-8 -*-
"""
Command-line entry point. Every subcommand runs one of the project's flows
locally and turns the final flow state into the exit status.
"""
from pathlib import Path
from typing import List, Optional

import typer
from prefect import Flow
from prefect.executors import LocalDaskExecutor, LocalExecutor

from pipelines.radiative_transfer.audit.flows import audit_flow
from pipelines.radiative_transfer.rate_study.flows import rate_study_flow
from pipelines.radiative_transfer.run_kinetic.flows import run_kinetic_flow
from pipelines.radiative_transfer.run_limit.flows import run_limit_flow
from pipelines.radiative_transfer.selftest.flows import selftest_flow

app = typer.Typer(
    help="Radiative heat transfer: kinetic runs, diffusion limit runs and epsilon-rate studies.",
    no_args_is_help=True,
)

ConfigOption = typer.Option(..., "--config", help="YAML run or sweep configuration.")
OutOption = typer.Option(None, "--out", help="Output directory (overrides output_dir).")
EpsilonOption = typer.Option(None, "--epsilon", help="Overrides params.epsilon of a run.")
ThreadsOption = typer.Option(1, "--threads", min=1, help="Worker threads for mapped tasks.")
SeedOption = typer.Option(None, "--seed", help="Overrides the seed.")


def make_executor(threads: int):
    if threads > 1:
        return LocalDaskExecutor(scheduler="threads", num_workers=threads)
    return LocalExecutor()


def failure_messages(flow_state) -> List[str]:
    """Messages of the failed task runs in a finished flow state."""
    results = flow_state.result if isinstance(flow_state.result, dict) else {}
    messages = []
    for task_obj, task_state in results.items():
        if task_state.is_failed():
            messages.append(f"{task_obj.name}: {task_state.message}")
    return messages or [str(flow_state.message)]


def run_flow(flow: Flow, parameters: dict, threads: int = 1) -> None:
    """
    Runs `flow` in-process.

    Raises:
        typer.Exit: with code 1 when the flow ends in a failed state.
    """
    state = flow.run(parameters=parameters, executor=make_executor(threads))
    if state.is_failed():
        for message in failure_messages(state):
            typer.echo(message, err=True)
        raise typer.Exit(code=1)


def require_file(path: Path) -> None:
    if not path.is_file():
        typer.echo(f"Configuration file not found: {path}", err=True)
        raise typer.Exit(code=2)


@app.command("run-kinetic")
def run_kinetic(
    config: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    epsilon: Optional[float] = EpsilonOption,
    threads: int = ThreadsOption,
    seed: Optional[int] = SeedOption,
):
    """Integrates the kinetic system and writes energy.csv, steps.csv and summary.json."""
    require_file(config)
    parameters = dict(
        config_path=str(config),
        out=str(out) if out else None,
        epsilon=epsilon,
        seed=seed,
    )
    run_flow(run_kinetic_flow, parameters, threads)


@app.command("run-limit")
def run_limit(
    config: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    epsilon: Optional[float] = EpsilonOption,
    threads: int = ThreadsOption,
    seed: Optional[int] = SeedOption,
):
    """Integrates the nonlinear diffusion limit and writes limit.csv."""
    require_file(config)
    parameters = dict(
        config_path=str(config),
        out=str(out) if out else None,
        epsilon=epsilon,
        seed=seed,
    )
    run_flow(run_limit_flow, parameters, threads)


@app.command("rate-study")
def rate_study(
    config: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    epsilon: Optional[float] = EpsilonOption,
    threads: int = ThreadsOption,
    seed: Optional[int] = SeedOption,
):
    """Runs an epsilon sweep against one limit run and fits the convergence rate."""
    require_file(config)
    parameters = dict(
        config_path=str(config),
        out=str(out) if out else None,
        epsilon=epsilon,
        seed=seed,
    )
    run_flow(rate_study_flow, parameters, threads)


@app.command("audit")
def audit(
    snapshots: Path = typer.Option(..., "--snapshots", help="Directory of snapshot_*.bin files."),
    config: Optional[Path] = typer.Option(
        None, "--config", help="Run configuration; defaults to the one in the snapshots."
    ),
    out: Optional[Path] = OutOption,
):
    """Recomputes energy records and the energy audit from snapshots."""
    if not snapshots.is_dir():
        typer.echo(f"Snapshot directory not found: {snapshots}", err=True)
        raise typer.Exit(code=2)
    if config is not None:
        require_file(config)
    parameters = dict(
        snapshot_dir=str(snapshots),
        config_path=str(config) if config else None,
        out=str(out) if out else None,
    )
    run_flow(audit_flow, parameters)


@app.command("selftest")
def selftest(
    out: Optional[Path] = OutOption,
    threads: int = ThreadsOption,
    seed: Optional[int] = SeedOption,
    suite: Optional[List[str]] = typer.Option(
        None, "--suite", help="Run only these suites (repeatable)."
    ),
):
    """Runs the invariant suites and writes selftest.json."""
    parameters = dict(out=str(out) if out else None, seed=seed, suites=suite or None)
    run_flow(selftest_flow, parameters, threads)


if __name__ == "__main__":
    app()
