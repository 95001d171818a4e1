# -*- coding: utf-8 -*-
"""
Tasks recomputing energy diagnostics from the snapshots of a finished run.
"""
import json
from pathlib import Path
from typing import List, Optional

import pandas as pd
from prefect import task
from prefeitura_rio.pipelines_utils.logging import log

from pipelines.constants import constants
from pipelines.radiative_transfer.models.config import RunConfig, config_hash, load_config
from pipelines.radiative_transfer.models.core import (
    IntensityField,
    KineticState,
    LimitState,
    TemperatureField,
)
from pipelines.radiative_transfer.models.diagnostics import (
    energy_audit,
    energy_record,
    limit_energy,
)
from pipelines.radiative_transfer.utils.io import read_snapshot, write_csv
from pipelines.radiative_transfer.utils.problem import Problem, build_problem


def read_snapshots(snapshot_dir: str) -> List[dict]:
    """
    Reads every `snapshot_*.bin` in `snapshot_dir`, ordered by time.

    Raises:
        FileNotFoundError: if the directory holds no snapshot.
    """
    paths = sorted(Path(snapshot_dir).glob("snapshot_*.bin"))
    if not paths:
        raise FileNotFoundError(f"No snapshot_*.bin files in {snapshot_dir}")
    snapshots = []
    for path in paths:
        time, temperature, intensity, metadata = read_snapshot(path)
        snapshots.append(
            {
                "path": str(path),
                "time": time,
                "temperature": temperature,
                "intensity": intensity,
                "metadata": metadata,
            }
        )
    snapshots.sort(key=lambda s: s["time"])
    kinds = {s["intensity"] is None for s in snapshots}
    if len(kinds) > 1:
        raise ValueError(f"{snapshot_dir} mixes kinetic and limit snapshots")
    log(f"Read {len(snapshots)} snapshots from {snapshot_dir}")
    return snapshots


def rebuild_problem(snapshots: List[dict], config_path: Optional[str] = None) -> Problem:
    """
    Rebuilds the run's Problem from `config_path` when given, otherwise from the
    configuration stored in the snapshot sidecars. Relative paths in a sidecar
    configuration resolve against the directory of the original config file.
    """
    metadata = snapshots[0]["metadata"]
    if config_path:
        config = load_config(config_path, RunConfig)
        base_dir = Path(config_path).resolve().parent
    elif "config" in metadata:
        config = RunConfig.model_validate(metadata["config"])
        base_dir = Path(metadata["base_dir"]) if metadata.get("base_dir") else None
    else:
        raise ValueError("snapshots carry no configuration; pass the run config")
    stored = metadata.get("config_hash")
    if stored is not None and stored != config_hash(config):
        log(
            f"Config hash {config_hash(config)[:12]} differs from the snapshots' {stored[:12]}",
            level="warning",
        )
    return build_problem(config, base_dir)


def audit_snapshots(snapshots: List[dict], problem: Problem) -> dict:
    """
    Energy records and the regime's energy audit for kinetic snapshots, or the
    limit energy rows for limit snapshots.
    """
    grid = problem.grid
    if snapshots[0]["intensity"] is None:
        rows = [
            limit_energy(LimitState(s["time"], TemperatureField(grid, s["temperature"])))
            for s in snapshots
        ]
        return {"kind": "limit", "frame": pd.DataFrame(rows, columns=constants.LIMIT_COLUMNS.value)}

    records = []
    for s in snapshots:
        state = KineticState(
            s["time"],
            TemperatureField(grid, s["temperature"]),
            IntensityField(grid, s["intensity"]),
        )
        records.append(energy_record(state, problem.quad, problem.params, problem.boundary_data))
    audit = energy_audit(records, problem.params)
    frame = pd.DataFrame([vars(r) for r in records], columns=constants.ENERGY_COLUMNS.value)
    log(f"Audit over {len(records)} snapshots: max residual {audit.max_residual:.3e}")
    return {"kind": "kinetic", "frame": frame, "audit": audit}


@task
def task_read_snapshots(snapshot_dir: str) -> List[dict]:
    return read_snapshots(snapshot_dir)


@task
def task_rebuild_problem(snapshots: List[dict], config_path: Optional[str] = None) -> Problem:
    return rebuild_problem(snapshots, config_path)


@task
def task_audit_snapshots(snapshots: List[dict], problem: Problem) -> dict:
    return audit_snapshots(snapshots, problem)


@task
def task_write_audit_outputs(
    result: dict, problem: Problem, snapshot_dir: str, out: Optional[str] = None
) -> dict:
    """
    Writes energy_audit.csv (or limit_audit.csv) and audit.json to `out`, by
    default the directory above the snapshots.
    """
    output = Path(out) if out else Path(snapshot_dir).resolve().parent
    output.mkdir(parents=True, exist_ok=True)
    name = "energy_audit.csv" if result["kind"] == "kinetic" else "limit_audit.csv"
    path = write_csv(result["frame"], output / name, problem.config_hash)
    summary = {
        "scenario": problem.config.scenario,
        "config_hash": problem.config_hash,
        "kind": result["kind"],
        "n_snapshots": len(result["frame"]),
        "files": {"audit": str(path)},
    }
    if "audit" in result:
        audit = result["audit"]
        summary.update(
            regime=audit.regime.value,
            max_audit_residual=audit.max_residual,
            growth_constant=audit.growth_constant,
            nonnegative_terms=audit.nonnegative,
            negative_terms=audit.negative_terms,
        )
    (output / "audit.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary
