# -*- coding: utf-8 -*-
"""
Builders for initial temperature profiles and boundary data from config specs.
"""
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from prefeitura_rio.pipelines_utils.logging import log

from pipelines.radiative_transfer.models.config import BoundarySpec, ProfileSpec
from pipelines.radiative_transfer.models.core import BoundaryData, SpatialGrid, TemperatureField


def uniform(grid: SpatialGrid, c0: float) -> np.ndarray:
    return np.full(grid.shape, float(c0))


def sine(grid: SpatialGrid, c0: float, amp: float, k) -> np.ndarray:
    k = list(k) + [0] * (grid.dim - len(k))
    points = grid.points
    product = np.ones(grid.shape)
    for axis in range(grid.dim):
        if k[axis]:
            product *= np.sin(
                2.0 * np.pi * k[axis] * points[..., axis] / grid.extent_per_axis[axis]
            )
    return c0 + amp * product


def gaussian(grid: SpatialGrid, c0: float, amp: float, width: float) -> np.ndarray:
    points = grid.points[..., : grid.dim]
    center = np.asarray(grid.extent_per_axis) / 2.0
    r2 = np.sum((points - center) ** 2, axis=-1)
    return c0 + amp * np.exp(-r2 / (2.0 * width**2))


def build_initial_temperature(spec: ProfileSpec, grid: SpatialGrid) -> TemperatureField:
    """
    Raises:
        ValueError: if the profile is negative somewhere or a file array has the
            wrong shape.
    """
    if spec.kind == "uniform":
        values = uniform(grid, spec.c0)
    elif spec.kind == "sine":
        values = sine(grid, spec.c0, spec.amp, spec.k)
    elif spec.kind == "gaussian":
        values = gaussian(grid, spec.c0, spec.amp, spec.width)
    else:
        values = np.load(Path(spec.path))
        if values.shape != grid.shape:
            raise ValueError(f"profile file {spec.path} has shape {values.shape}, grid {grid.shape}")
    if np.any(values < 0):
        raise ValueError(f"initial profile {spec.kind!r} is negative somewhere")
    log(f"Initial profile {spec.kind}: min={values.min():.6g}, max={values.max():.6g}")
    return TemperatureField(grid, values)


def load_boundary_table(path: Path, grid: SpatialGrid) -> BoundaryData:
    """Reads a CSV with columns face, t_boundary and an optional psi_boundary."""
    table = pd.read_csv(path, comment="#")
    missing = {"face", "t_boundary"} - set(table.columns)
    if missing:
        raise ValueError(f"boundary table {path} is missing columns {sorted(missing)}")
    values = {}
    for row in table.itertuples(index=False):
        psi = getattr(row, "psi_boundary", None)
        psi = None if psi is None or pd.isna(psi) else float(psi)
        values[str(row.face)] = (float(row.t_boundary), psi)
    return BoundaryData.from_faces(values, grid)


def build_boundary_data(
    spec: BoundarySpec, grid: SpatialGrid, base_dir: Optional[Path] = None
) -> Optional[BoundaryData]:
    if spec.kind == "none":
        return None
    if spec.kind == "constant":
        data = BoundaryData.constant(spec.t_boundary, spec.psi_boundary)
    else:
        path = Path(spec.path)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        data = load_boundary_table(path, grid)
    return data
