# -*- coding: utf-8 -*-
"""
Turns a validated RunConfig into the solver inputs of one run.
"""
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from prefeitura_rio.pipelines_utils.logging import log

from pipelines.radiative_transfer.models.config import RunConfig, config_hash
from pipelines.radiative_transfer.models.core import (
    BoundaryData,
    KineticState,
    LimitState,
    Params,
    SpatialGrid,
    TemperatureField,
    well_prepared_init,
)
from pipelines.radiative_transfer.models.kinetic_solver import stable_dt
from pipelines.radiative_transfer.models.quadrature import AngularQuadrature, build_quadrature
from pipelines.radiative_transfer.utils.profiles import (
    build_boundary_data,
    build_initial_temperature,
)


@dataclass
class Problem:
    config: RunConfig
    grid: SpatialGrid
    quad: AngularQuadrature
    params: Params
    boundary_data: Optional[BoundaryData]
    initial: TemperatureField
    config_hash: str
    base_dir: Optional[Path] = None

    def kinetic_state(self) -> KineticState:
        return well_prepared_init(self.initial, self.quad.n_nodes)

    def limit_state(self) -> LimitState:
        return LimitState(0.0, self.initial.copy())

    def kinetic_dt(self) -> float:
        return stable_dt(self.grid, self.quad, self.params, self.config.solver)

    def limit_dt(self) -> float:
        return self.config.limit_dt or self.kinetic_dt()

    def metadata(self) -> dict:
        """Sidecar fields; `base_dir` lets an audit resolve relative config paths later."""
        return {
            "scenario": self.config.scenario,
            "config_hash": self.config_hash,
            "config": self.config.model_dump(mode="json"),
            "base_dir": str(self.base_dir) if self.base_dir is not None else None,
            "n_polar": self.quad.n_polar,
            "n_azimuth": self.quad.n_azimuth,
        }


def confirm_well_prepared(
    data: BoundaryData, grid: SpatialGrid, quad: AngularQuadrature, times: Sequence[float]
) -> BoundaryData:
    """
    Samples psi_b == Tb^4 on every boundary face at `times` and returns the data
    with `well_prepared` set from the samples.
    """
    if not grid.faces:
        return data
    points = np.concatenate([grid.face_points(face).reshape(-1, 3) for face in grid.faces])
    sampled = data.check_well_prepared(times, points, quad.nodes)
    if sampled != data.well_prepared:
        data = replace(data, well_prepared=sampled)
    if not sampled:
        log(f"Boundary data ({data.description}) is not well prepared", level="warning")
    return data


def build_problem(config: RunConfig, base_dir: Optional[Path] = None) -> Problem:
    """
    Args:
        config (RunConfig): Validated run configuration.
        base_dir (Path, optional): Directory relative file paths in the config
            (profile arrays, boundary tables) are resolved against.
    """
    if base_dir is not None:
        base_dir = Path(base_dir).resolve()
    grid = config.build_grid()
    initial_spec = config.initial
    if initial_spec.kind == "file" and base_dir is not None:
        path = Path(initial_spec.path)
        if not path.is_absolute():
            initial_spec = initial_spec.model_copy(update={"path": str(base_dir / path)})
    quad = build_quadrature(config.quadrature.n_polar, config.quadrature.n_azimuth)
    boundary_data = build_boundary_data(config.boundary, grid, base_dir)
    if boundary_data is not None:
        boundary_data = confirm_well_prepared(boundary_data, grid, quad, [0.0, config.t_end])
    return Problem(
        config=config,
        grid=grid,
        quad=quad,
        params=config.params,
        boundary_data=boundary_data,
        initial=build_initial_temperature(initial_spec, grid),
        config_hash=config_hash(config),
        base_dir=base_dir,
    )
