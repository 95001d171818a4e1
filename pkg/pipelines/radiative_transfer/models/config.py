# -*- coding: utf-8 -*-
"""
Run and sweep configuration: YAML files parsed into pydantic models, with a
canonical dump (sorted keys) whose SHA-256 identifies every output file.
"""
import hashlib
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Type, TypeVar, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from pipelines.constants import constants
from pipelines.radiative_transfer.models.core import (
    BoundaryMode,
    Params,
    SpatialGrid,
    make_grid,
)
from pipelines.radiative_transfer.models.kinetic_solver import KineticSolverConfig
from pipelines.radiative_transfer.models.limit_solver import LimitSolverConfig

ConfigModel = TypeVar("ConfigModel", bound=BaseModel)


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpec(_Spec):
    dim: int = Field(ge=1, le=3)
    cells: List[int]
    extent: List[float]
    # None derives periodicity from the boundary regime
    periodic: Optional[List[bool]] = None

    def build(self, bc_mode: BoundaryMode) -> SpatialGrid:
        periodic = self.periodic
        if periodic is None:
            periodic = [bc_mode == BoundaryMode.TORUS] * self.dim
        return make_grid(self.dim, self.cells, self.extent, periodic)


class QuadratureSpec(_Spec):
    n_polar: int = Field(default=constants.DEFAULT_N_POLAR.value, ge=2)
    n_azimuth: int = Field(default=constants.DEFAULT_N_AZIMUTH.value, ge=4)

    @field_validator("n_azimuth")
    @classmethod
    def _even(cls, value: int) -> int:
        if value % 2:
            raise ValueError("n_azimuth must be even")
        return value


class ProfileSpec(_Spec):
    """
    Named initial temperature profile.

    - uniform: c0 everywhere
    - sine: c0 + amp * prod_a sin(2 pi k_a x_a / L_a) over axes with k_a != 0
    - gaussian: c0 + amp * exp(-|x - center|^2 / (2 width^2)), centered in the box
    - file: a .npy array shaped like the grid
    """

    kind: Literal["uniform", "sine", "gaussian", "file"] = "uniform"
    c0: float = 1.0
    amp: float = 0.0
    k: List[int] = Field(default_factory=lambda: [1])
    width: float = Field(default=0.1, gt=0)
    path: Optional[str] = None

    @model_validator(mode="after")
    def _check_file(self) -> "ProfileSpec":
        if self.kind == "file" and not self.path:
            raise ValueError("file profiles need a path")
        return self


class BoundarySpec(_Spec):
    """
    Boundary data: none (torus), constant Tb with psi_b (None means Tb^4),
    or a CSV table with columns face, t_boundary, psi_boundary.
    """

    kind: Literal["none", "constant", "table"] = "none"
    t_boundary: float = Field(default=1.0, gt=0)
    psi_boundary: Optional[float] = None
    path: Optional[str] = None

    @model_validator(mode="after")
    def _check_table(self) -> "BoundarySpec":
        if self.kind == "table" and not self.path:
            raise ValueError("table boundary data needs a path")
        return self


class RunConfig(_Spec):
    scenario: str
    grid: GridSpec
    quadrature: QuadratureSpec = QuadratureSpec()
    params: Params
    initial: ProfileSpec = ProfileSpec()
    boundary: BoundarySpec = BoundarySpec()
    t_end: float = Field(gt=0)
    output_dir: str = "output"
    seed: int = 0
    record_every: int = Field(default=1, ge=1)
    snapshot_every: Optional[int] = Field(default=None, ge=1)
    solver: KineticSolverConfig = KineticSolverConfig()
    limit_solver: LimitSolverConfig = LimitSolverConfig()
    # limit run step; None uses the kinetic stable step
    limit_dt: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _check_regime(self) -> "RunConfig":
        self.grid.build(self.params.bc_mode).check_mode(self.params.bc_mode)
        if self.params.bc_mode != BoundaryMode.TORUS and self.boundary.kind == "none":
            raise ValueError(f"{self.params.bc_mode.value} runs need boundary data")
        if self.solver.galerkin_modes is not None and self.params.bc_mode != BoundaryMode.TORUS:
            raise ValueError("galerkin_modes is only allowed in torus mode")
        return self

    def build_grid(self) -> SpatialGrid:
        return self.grid.build(self.params.bc_mode)

    def with_epsilon(self, epsilon: float) -> "RunConfig":
        params = self.params.model_copy(update={"epsilon": epsilon})
        return self.model_copy(update={"params": Params.model_validate(params.model_dump())})


class SyntheticSpec(_Spec):
    """Errors injected as constant * eps^rate instead of running the solvers."""

    rate: float
    constant: float = Field(default=1.0, gt=0)


class SweepConfig(_Spec):
    base: RunConfig
    epsilon_list: List[float]
    # kinetic and limit errors are sampled at these times; defaults to [t_end]
    sample_times: Optional[List[float]] = None
    limit_dt: Optional[float] = Field(default=None, gt=0)
    synthetic: Optional[SyntheticSpec] = None
    expected_rate: Optional[float] = None
    rate_band: Optional[Tuple[float, float]] = None

    @field_validator("epsilon_list")
    @classmethod
    def _decreasing(cls, values: List[float]) -> List[float]:
        if len(values) < 3:
            raise ValueError("a sweep needs at least 3 epsilons")
        if any(v <= 0 for v in values):
            raise ValueError("epsilons must be positive")
        if any(b >= a for a, b in zip(values, values[1:])):
            raise ValueError("epsilon_list must be strictly decreasing")
        return values

    @model_validator(mode="after")
    def _check_samples(self) -> "SweepConfig":
        times = self.times()
        if any(t <= 0 or t > self.base.t_end for t in times):
            raise ValueError("sample_times must lie in (0, t_end]")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("sample_times must be increasing")
        return self

    def times(self) -> List[float]:
        return list(self.sample_times) if self.sample_times else [self.base.t_end]


def parse_config(text: str, model: Type[ConfigModel] = RunConfig) -> ConfigModel:
    """
    Parses YAML text into `model`.

    Raises:
        ValueError: if the text is not a YAML mapping; pydantic's ValidationError
            (a ValueError) on invalid fields.
    """
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ValueError("configuration must be a YAML mapping")
    return model.model_validate(data)


def load_config(path: Union[str, Path], model: Type[ConfigModel] = RunConfig) -> ConfigModel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"configuration file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"), model)


def dump_config(config: BaseModel) -> str:
    """Canonical YAML: defaults included, keys sorted."""
    return yaml.safe_dump(config.model_dump(mode="json"), sort_keys=True, default_flow_style=False)


def config_hash(config: BaseModel) -> str:
    return hashlib.sha256(dump_config(config).encode("utf-8")).hexdigest()
