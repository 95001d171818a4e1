# -*- coding: utf-8 -*-
"""
Domain types shared by the kinetic and limit solvers: scaling parameters, the
cell-centered grid, temperature/intensity fields, boundary data and states.

Physical constants of the grey model are all 1 (sigma = pi), so none is stored.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from prefeitura_rio.pipelines_utils.logging import log
from pydantic import BaseModel, ConfigDict, Field, model_validator


class ConvergenceError(RuntimeError):
    """A Newton, Krylov or CG iteration stopped before reaching its tolerance."""


class StabilityError(ValueError):
    """An explicit step was requested with a time step above its stability bound."""


class BoundaryMode(str, Enum):
    TORUS = "torus"
    DIRICHLET = "dirichlet"
    ROBIN = "robin"


class Params(BaseModel):
    """
    Scaling parameters of the rescaled system.

    Attributes:
        epsilon (float): Knudsen-like scaling, multiplies transport by 1/eps and
            relaxation by 1/eps^2.
        alpha (float): Absorbing share of the mixed reflective boundary condition.
        robin_r (float): Exponent r of the Robin condition eps^r n.grad(T) = Tb - T.
        bc_mode (BoundaryMode): Temperature boundary regime.
    """

    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(gt=0)
    alpha: float = Field(default=0.5, gt=0, lt=1)
    robin_r: float = Field(default=1.0, ge=0)
    bc_mode: BoundaryMode = BoundaryMode.TORUS


class Face(NamedTuple):
    """Box face: `side` is -1 for the low face of `axis`, +1 for the high one."""

    axis: int
    side: int

    @property
    def normal(self) -> np.ndarray:
        n = np.zeros(3)
        n[self.axis] = float(self.side)
        return n

    @property
    def name(self) -> str:
        return "xyz"[self.axis] + ("-" if self.side < 0 else "+")

    @classmethod
    def from_name(cls, name: str) -> "Face":
        name = name.strip().lower()
        if len(name) != 2 or name[0] not in "xyz" or name[1] not in "+-":
            raise ValueError(f"Invalid face name: {name!r} (expected one of x-, x+, y-, ...)")
        return cls(axis="xyz".index(name[0]), side=-1 if name[1] == "-" else 1)


class SpatialGrid(BaseModel):
    """
    Cell-centered box grid with per-axis periodicity.

    Axes beyond `dim` are suppressed: fields are constant along them and their
    coordinate is reported as 0 in `points`.
    """

    model_config = ConfigDict(frozen=True)

    dim: int = Field(ge=1, le=3)
    cells_per_axis: Tuple[int, ...]
    extent_per_axis: Tuple[float, ...]
    periodic_per_axis: Tuple[bool, ...]

    @model_validator(mode="after")
    def _check_axes(self) -> "SpatialGrid":
        for name in ("cells_per_axis", "extent_per_axis", "periodic_per_axis"):
            if len(getattr(self, name)) != self.dim:
                raise ValueError(f"{name} must have length dim={self.dim}")
        if any(n < 2 for n in self.cells_per_axis):
            raise ValueError(f"every axis needs at least 2 cells, got {self.cells_per_axis}")
        if any(not np.isfinite(e) or e <= 0 for e in self.extent_per_axis):
            raise ValueError(f"extents must be positive, got {self.extent_per_axis}")
        return self

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.cells_per_axis)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells_per_axis))

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple(e / n for e, n in zip(self.extent_per_axis, self.cells_per_axis))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def is_torus(self) -> bool:
        return all(self.periodic_per_axis)

    @property
    def faces(self) -> List[Face]:
        """Non-periodic faces, low side first on each axis."""
        return [
            Face(axis, side)
            for axis in range(self.dim)
            if not self.periodic_per_axis[axis]
            for side in (-1, 1)
        ]

    def centers(self, axis: int) -> np.ndarray:
        return (np.arange(self.cells_per_axis[axis]) + 0.5) * self.spacing[axis]

    @property
    def points(self) -> np.ndarray:
        """Cell centers as 3-vectors, shape `shape + (3,)`."""
        mesh = np.meshgrid(*[self.centers(a) for a in range(self.dim)], indexing="ij")
        pts = np.zeros(self.shape + (3,))
        for axis, coords in enumerate(mesh):
            pts[..., axis] = coords
        return pts

    def face_points(self, face: Face) -> np.ndarray:
        """Face centers of the boundary layer of cells, shape with size 1 along `face.axis`."""
        pts = boundary_slab(self.points, face).copy()
        pts[..., face.axis] = 0.0 if face.side < 0 else self.extent_per_axis[face.axis]
        return pts

    def face_area(self, face: Face) -> float:
        return float(np.prod([h for a, h in enumerate(self.spacing) if a != face.axis]))

    def check_mode(self, bc_mode: BoundaryMode) -> None:
        """
        Raises:
            ValueError: if the periodicity pattern does not match the boundary regime.
        """
        if bc_mode == BoundaryMode.TORUS and not self.is_torus:
            raise ValueError("torus mode requires every axis to be periodic")
        if bc_mode != BoundaryMode.TORUS and any(self.periodic_per_axis):
            raise ValueError(f"{bc_mode.value} mode requires every axis to be non-periodic")


def boundary_slab(values: np.ndarray, face: Face) -> np.ndarray:
    """Boundary-adjacent layer of `values` along `face.axis`, keeping that axis with size 1."""
    index = 0 if face.side < 0 else values.shape[face.axis] - 1
    return np.take(values, [index], axis=face.axis)


def make_grid(
    dim: int,
    cells_per_axis: Sequence[int],
    extent_per_axis: Sequence[float],
    periodic_per_axis: Sequence[bool],
) -> SpatialGrid:
    """
    Builds a cell-centered grid with centers at (i + 0.5) * dx on every axis.

    Raises:
        ValueError: on length mismatch with `dim`, fewer than 2 cells or a
            non-positive extent on some axis.
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    lengths = {len(cells_per_axis), len(extent_per_axis), len(periodic_per_axis)}
    if lengths != {dim}:
        raise ValueError(
            f"axis lists must all have length {dim}, got "
            f"{len(cells_per_axis)}, {len(extent_per_axis)}, {len(periodic_per_axis)}"
        )
    return SpatialGrid(
        dim=dim,
        cells_per_axis=tuple(int(n) for n in cells_per_axis),
        extent_per_axis=tuple(float(e) for e in extent_per_axis),
        periodic_per_axis=tuple(bool(p) for p in periodic_per_axis),
    )


@dataclass
class TemperatureField:
    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"temperature shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("temperature field has non-finite values")

    def copy(self) -> "TemperatureField":
        return TemperatureField(self.grid, self.values.copy())


@dataclass
class IntensityField:
    """Intensity per (cell, ordinate); ordinates are the last, contiguous axis."""

    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if self.values.ndim != self.grid.dim + 1 or self.values.shape[:-1] != self.grid.shape:
            raise ValueError(
                f"intensity shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("intensity field has non-finite values")

    @property
    def n_ordinates(self) -> int:
        return self.values.shape[-1]

    def copy(self) -> "IntensityField":
        return IntensityField(self.grid, self.values.copy())


@dataclass
class KineticState:
    time: float
    temperature: TemperatureField
    intensity: IntensityField

    def __post_init__(self):
        if self.time < 0:
            raise ValueError(f"time must be nonnegative, got {self.time}")
        if self.temperature.grid != self.intensity.grid:
            raise ValueError("temperature and intensity live on different grids")

    @property
    def grid(self) -> SpatialGrid:
        return self.temperature.grid

    def copy(self) -> "KineticState":
        return KineticState(self.time, self.temperature.copy(), self.intensity.copy())


@dataclass
class LimitState:
    time: float
    temperature: TemperatureField

    def __post_init__(self):
        if np.any(self.temperature.values < 0):
            raise ValueError("limit temperature must be nonnegative")

    @property
    def grid(self) -> SpatialGrid:
        return self.temperature.grid


def _as_callable(value) -> Callable:
    if callable(value):
        return value
    constant = float(value)
    return lambda t, points, *args: constant


@dataclass(frozen=True)
class BoundaryData:
    """
    Boundary temperature Tb(t, x) > 0 and incoming intensity psi_b(t, x, beta).

    `t_boundary(t, points)` receives points of shape (..., 3) and returns values
    broadcastable to `points.shape[:-1]`; `psi_boundary(t, points, directions)`
    receives directions of shape (Q, 3) and returns values broadcastable to
    `points.shape[:-1] + (Q,)`.
    """

    t_boundary: Callable
    psi_boundary: Callable
    well_prepared: bool = False
    description: str = field(default="callable", compare=False)

    @classmethod
    def constant(cls, t_boundary: float, psi_boundary: Optional[float] = None) -> "BoundaryData":
        if t_boundary <= 0:
            raise ValueError(f"boundary temperature must be positive, got {t_boundary}")
        if psi_boundary is None:
            return cls.from_callable(_as_callable(t_boundary), description=f"Tb={t_boundary}")
        return cls(
            t_boundary=_as_callable(t_boundary),
            psi_boundary=_as_callable(psi_boundary),
            well_prepared=float(psi_boundary) == float(t_boundary) ** 4,
            description=f"Tb={t_boundary}, psi_b={psi_boundary}",
        )

    @classmethod
    def from_callable(
        cls,
        t_boundary: Callable,
        psi_boundary: Optional[Callable] = None,
        description: str = "callable",
    ) -> "BoundaryData":
        """Without `psi_boundary` the data is well prepared: psi_b = Tb^4."""
        if psi_boundary is None:

            def psi_boundary(t, points, directions):
                tb = np.broadcast_to(t_boundary(t, points), np.shape(points)[:-1])
                return np.asarray(tb, dtype=float)[..., None] ** 4

            return cls(t_boundary, psi_boundary, well_prepared=True, description=description)
        return cls(t_boundary, psi_boundary, well_prepared=False, description=description)

    @classmethod
    def from_faces(
        cls,
        values: dict,
        grid: SpatialGrid,
    ) -> "BoundaryData":
        """
        Piecewise constant data per face.

        Args:
            values (dict): Maps face names ("x-", "x+", ...) to (Tb, psi_b or None).
            grid (SpatialGrid): Grid whose box faces the points are matched against.
        """
        faces = {Face.from_name(name): tuple(v) for name, v in values.items()}
        missing = [f.name for f in grid.faces if f not in faces]
        if missing:
            raise ValueError(f"boundary table has no entry for faces {missing}")
        for face, (tb, _) in faces.items():
            if tb <= 0:
                raise ValueError(f"boundary temperature on {face.name} must be positive, got {tb}")

        def _lookup(points: np.ndarray, column: int) -> np.ndarray:
            out = np.full(points.shape[:-1], np.nan)
            for face, row in faces.items():
                if face.axis >= grid.dim:
                    continue
                target = 0.0 if face.side < 0 else grid.extent_per_axis[face.axis]
                on_face = np.isclose(points[..., face.axis], target, rtol=0.0, atol=1e-12)
                value = row[0] ** 4 if column == 1 and row[1] is None else row[column]
                out[on_face] = value
            return out

        def t_boundary(t, points):
            return _lookup(np.asarray(points, dtype=float), 0)

        def psi_boundary(t, points, directions):
            return _lookup(np.asarray(points, dtype=float), 1)[..., None]

        well_prepared = all(psib is None or psib == tb**4 for tb, psib in faces.values())
        return cls(t_boundary, psi_boundary, well_prepared, description="per-face table")

    def t_values(self, t: float, points: np.ndarray) -> np.ndarray:
        """
        Evaluates Tb on `points`.

        Raises:
            ValueError: if some value is not finite and strictly positive.
        """
        tb = np.broadcast_to(
            np.asarray(self.t_boundary(t, points), dtype=float), points.shape[:-1]
        ).copy()
        if not np.all(np.isfinite(tb)) or np.any(tb <= 0):
            raise ValueError(f"boundary temperature must be finite and positive at t={t}")
        return tb

    def psi_values(self, t: float, points: np.ndarray, directions: np.ndarray) -> np.ndarray:
        psi = np.asarray(self.psi_boundary(t, points, directions), dtype=float)
        return np.broadcast_to(psi, points.shape[:-1] + (directions.shape[0],)).copy()

    def check_well_prepared(
        self, times: Sequence[float], points: np.ndarray, directions: np.ndarray
    ) -> bool:
        """Whether psi_b == Tb^4 to machine precision on every sampled (t, x, beta)."""
        for t in times:
            tb4 = self.t_values(t, points)[..., None] ** 4
            psi = self.psi_values(t, points, directions)
            scale = max(1.0, float(np.max(np.abs(tb4))))
            if np.max(np.abs(psi - tb4)) > 8 * np.finfo(float).eps * scale:
                return False
        return True


def well_prepared_init(T0: TemperatureField, n_ordinates: int, time: float = 0.0) -> KineticState:
    """
    Builds a state at local equilibrium: psi(x, beta) = T0(x)^4 on every ordinate.

    Args:
        T0 (TemperatureField): Nonnegative initial temperature.
        n_ordinates (int): Number of quadrature nodes the intensity carries.
        time (float, optional): Initial time. Defaults to 0.

    Raises:
        ValueError: if T0 has negative entries.
    """
    if np.any(T0.values < 0):
        log(f"Initial temperature has negative entries (min {T0.values.min()})", level="error")
        raise ValueError("initial temperature must be nonnegative")
    t4 = T0.values**4
    psi = np.repeat(t4[..., None], n_ordinates, axis=-1)
    return KineticState(time, T0.copy(), IntensityField(T0.grid, psi))
