# -*- coding: utf-8 -*-
"""
Result files: CSVs headed by a config-hash comment line, and binary state
snapshots with JSON sidecars.

Snapshot layout (little endian):
    8 bytes   magic b"RHTSNAP1"
    uint32    dim
    uint32x3  cells per axis (1 for suppressed axes)
    uint32    ordinate count (0 for limit snapshots)
    float64   time
    float64   temperature, C order
    float64   intensity, cell-major with ordinates contiguous (absent if count is 0)
"""
import json
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from prefeitura_rio.pipelines_utils.logging import log

from pipelines.constants import constants

_HEADER = np.dtype([("dim", "<u4"), ("cells", "<u4", (3,)), ("n_ordinates", "<u4"), ("time", "<f8")])


def write_csv(frame: pd.DataFrame, path: Union[str, Path], config_hash: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# config_hash: {config_hash}\n")
        frame.to_csv(f, index=False, float_format=constants.CSV_FLOAT_FORMAT.value)
    log(f"Wrote {len(frame)} rows to {path}")
    return path


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def read_config_hash(path: Union[str, Path]) -> Optional[str]:
    with open(path, encoding="utf-8") as f:
        first = f.readline().strip()
    prefix = "# config_hash:"
    return first[len(prefix) :].strip() if first.startswith(prefix) else None


def write_snapshot(
    path: Union[str, Path],
    time: float,
    temperature: np.ndarray,
    intensity: Optional[np.ndarray] = None,
    metadata: Optional[dict] = None,
) -> Path:
    """Writes `path` (.bin) and its `.json` sidecar holding `metadata`."""
    path = Path(path).with_suffix(".bin")
    path.parent.mkdir(parents=True, exist_ok=True)
    cells = list(temperature.shape) + [1] * (3 - temperature.ndim)
    header = np.zeros((), dtype=_HEADER)
    header["dim"] = temperature.ndim
    header["cells"] = cells
    header["n_ordinates"] = 0 if intensity is None else intensity.shape[-1]
    header["time"] = time
    with open(path, "wb") as f:
        f.write(constants.SNAPSHOT_MAGIC.value)
        f.write(header.tobytes())
        f.write(np.ascontiguousarray(temperature, dtype="<f8").tobytes())
        if intensity is not None:
            f.write(np.ascontiguousarray(intensity, dtype="<f8").tobytes())

    sidecar = dict(metadata or {})
    sidecar.update({"time": time, "dim": int(temperature.ndim), "cells": cells[: temperature.ndim]})
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path


def read_snapshot(path: Union[str, Path]):
    """
    Returns:
        Tuple[float, np.ndarray, Optional[np.ndarray], dict]: time, temperature,
        intensity (None for limit snapshots) and the sidecar metadata.

    Raises:
        ValueError: on a bad magic number or a truncated payload.
    """
    path = Path(path).with_suffix(".bin")
    raw = path.read_bytes()
    magic = constants.SNAPSHOT_MAGIC.value
    if not raw.startswith(magic):
        raise ValueError(f"{path} is not a snapshot file")
    header = np.frombuffer(raw, dtype=_HEADER, count=1, offset=len(magic))[0]
    dim = int(header["dim"])
    shape = tuple(int(n) for n in header["cells"][:dim])
    n_ordinates = int(header["n_ordinates"])
    payload = np.frombuffer(raw, dtype="<f8", offset=len(magic) + _HEADER.itemsize)
    n_cells = int(np.prod(shape))
    expected = n_cells * (1 + n_ordinates)
    if payload.size != expected:
        raise ValueError(f"{path} holds {payload.size} values, expected {expected}")
    temperature = payload[:n_cells].reshape(shape).copy()
    intensity = None
    if n_ordinates:
        intensity = payload[n_cells:].reshape(shape + (n_ordinates,)).copy()
    sidecar = path.with_suffix(".json")
    metadata = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    return float(header["time"]), temperature, intensity, metadata


class SnapshotWriter:
    """
    Solver observer writing `snapshot_<step>.bin` every `every` steps. Works for
    kinetic states (with intensity) and limit states.
    """

    def __init__(self, directory: Union[str, Path], every: Optional[int], metadata: dict):
        self.directory = Path(directory)
        self.every = every
        self.metadata = metadata
        self.step = 0
        self.paths = []
        self._last_time = None

    def write(self, state, step: int) -> Path:
        intensity = getattr(state, "intensity", None)
        path = write_snapshot(
            self.directory / f"snapshot_{step:07d}",
            state.time,
            state.temperature.values,
            None if intensity is None else intensity.values,
            dict(self.metadata, step=step),
        )
        self.paths.append(path)
        self._last_time = state.time
        return path

    def __call__(self, state, report=None) -> None:
        self.step = report.step if report is not None else self.step + 1
        if self.every and self.step % self.every == 0:
            self.write(state, self.step)

    def finish(self, state) -> None:
        """Writes the final state unless the stride already did."""
        if self._last_time != state.time:
            self.write(state, self.step)
