# -*- coding: utf-8 -*-
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from pipelines.radiative_transfer.models.config import (
    BoundarySpec,
    ProfileSpec,
    RunConfig,
    load_config,
)
from pipelines.radiative_transfer.models.core import BoundaryData, Face, LimitState, make_grid
from pipelines.radiative_transfer.models.kinetic_solver import KineticSolverConfig, advance
from pipelines.radiative_transfer.utils.io import (
    SnapshotWriter,
    read_config_hash,
    read_csv,
    read_snapshot,
    write_csv,
    write_snapshot,
)
from pipelines.radiative_transfer.utils.problem import build_problem
from pipelines.radiative_transfer.utils.profiles import (
    build_boundary_data,
    build_initial_temperature,
    load_boundary_table,
)

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def test_csv_carries_config_hash(tmp_path):
    frame = pd.DataFrame({"time": [0.0, 0.1], "H": [1.0 / 3.0, 2.5e-17]})
    path = write_csv(frame, tmp_path / "nested" / "out.csv", "abc123")
    assert path.read_text().splitlines()[0] == "# config_hash: abc123"
    assert read_config_hash(path) == "abc123"
    back = read_csv(path)
    assert list(back.columns) == ["time", "H"]
    assert back["H"].tolist() == frame["H"].tolist()


def test_csv_without_hash(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("a,b\n1,2\n")
    assert read_config_hash(path) is None


def test_kinetic_snapshot(tmp_path):
    rng = np.random.default_rng(5)
    T = rng.uniform(0.5, 1.5, size=(4, 3))
    psi = rng.uniform(0.0, 2.0, size=(4, 3, 8))
    path = write_snapshot(tmp_path / "snapshot_0000001", 0.25, T, psi, {"scenario": "unit"})
    assert path.suffix == ".bin"
    time, T_back, psi_back, meta = read_snapshot(path)
    assert time == 0.25
    assert np.array_equal(T_back, T)
    assert np.array_equal(psi_back, psi)
    assert meta["scenario"] == "unit"
    assert meta["dim"] == 2 and meta["cells"] == [4, 3]


def test_limit_snapshot_has_no_intensity(tmp_path):
    T = np.linspace(1.0, 2.0, 6)
    path = write_snapshot(tmp_path / "limit", 1.5, T)
    time, T_back, psi_back, meta = read_snapshot(path)
    assert time == 1.5 and psi_back is None
    assert np.array_equal(T_back, T)
    assert meta == {"time": 1.5, "dim": 1, "cells": [6]}


def test_bad_snapshots_are_rejected(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOTASNAP" + bytes(64))
    with pytest.raises(ValueError, match="not a snapshot"):
        read_snapshot(bad)

    path = write_snapshot(tmp_path / "cut", 0.0, np.ones(8))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError, match="expected"):
        read_snapshot(path)


def test_snapshot_writer_on_kinetic_run(tmp_path, smooth_state, quad, torus_params):
    writer = SnapshotWriter(tmp_path, every=3, metadata={"scenario": "unit"})
    config = KineticSolverConfig(dt_override=1e-3)
    final = advance(smooth_state, 0.007, torus_params, config, quad, observer=writer)
    writer.finish(final)
    assert [p.name for p in writer.paths] == [
        "snapshot_0000003.bin",
        "snapshot_0000006.bin",
        "snapshot_0000007.bin",
    ]
    time, T, psi, meta = read_snapshot(writer.paths[-1])
    assert time == final.time
    assert np.array_equal(psi, final.intensity.values)
    assert meta["step"] == 7
    writer.finish(final)
    assert len(writer.paths) == 3


def test_snapshot_writer_on_limit_states(tmp_path, torus_1d, make_sine):
    writer = SnapshotWriter(tmp_path, every=None, metadata={})
    T = make_sine(torus_1d)
    for k in range(1, 4):
        writer(LimitState(0.1 * k, T))
    assert writer.paths == []
    writer.finish(LimitState(0.3, T))
    assert writer.paths[0].name == "snapshot_0000003.bin"
    assert read_snapshot(writer.paths[0])[2] is None


def test_profiles():
    grid = make_grid(2, [8, 8], [1.0, 2.0], [True, True])
    sine = build_initial_temperature(ProfileSpec(kind="sine", c0=1.0, amp=0.5, k=[1, 1]), grid)
    assert sine.values.shape == (8, 8)
    assert sine.values.mean() == pytest.approx(1.0)
    gaussian = build_initial_temperature(ProfileSpec(kind="gaussian", amp=1.0, width=0.2), grid)
    peak = np.unravel_index(np.argmax(gaussian.values), grid.shape)
    assert peak in {(3, 3), (3, 4), (4, 3), (4, 4)}
    assert gaussian.values.min() >= 1.0
    with pytest.raises(ValueError):
        build_initial_temperature(ProfileSpec(kind="uniform", c0=-1.0), grid)


def test_file_profile(tmp_path, torus_1d):
    values = np.linspace(1.0, 2.0, 32)
    np.save(tmp_path / "profile.npy", values)
    spec = ProfileSpec(kind="file", path=str(tmp_path / "profile.npy"))
    field = build_initial_temperature(spec, torus_1d)
    assert np.array_equal(field.values, values)
    np.save(tmp_path / "short.npy", values[:10])
    short = spec.model_copy(update={"path": str(tmp_path / "short.npy")})
    with pytest.raises(ValueError):
        build_initial_temperature(short, torus_1d)


def test_boundary_table():
    grid = make_grid(2, [32, 32], [1.0, 1.0], [False, False])
    data = load_boundary_table(CONFIG_DIR / "dirichlet_2d_faces.csv", grid)
    assert np.allclose(data.t_values(0.0, grid.face_points(Face(0, -1))), 1.2)
    assert np.allclose(data.t_values(0.0, grid.face_points(Face(1, 1))), 1.0)


def test_boundary_table_needs_columns(tmp_path):
    grid = make_grid(1, [8], [1.0], [False])
    path = tmp_path / "faces.csv"
    path.write_text("face,temperature\nx-,1.0\nx+,1.0\n")
    with pytest.raises(ValueError, match="t_boundary"):
        load_boundary_table(path, grid)


def test_build_boundary_data(box_1d):
    assert build_boundary_data(BoundarySpec(), box_1d) is None
    data = build_boundary_data(BoundarySpec(kind="constant", t_boundary=1.5), box_1d)
    assert data.well_prepared


def test_build_problem_resolves_relative_paths():
    config = load_config(CONFIG_DIR / "dirichlet_2d.yaml")
    problem = build_problem(config, CONFIG_DIR)
    assert problem.grid.shape == (32, 32)
    assert problem.boundary_data is not None
    state = problem.kinetic_state()
    assert state.intensity.values.shape == (32, 32, problem.quad.n_nodes)
    assert problem.limit_state().time == 0.0
    assert problem.limit_dt() == problem.kinetic_dt()
    meta = problem.metadata()
    assert meta["config_hash"] == problem.config_hash
    assert meta["config"]["scenario"] == "dirichlet-2d"


@pytest.mark.parametrize(
    "psi_boundary, expected", [(1.2**4 + 1e-15, True), (2.5, False)], ids=["ulp", "off"]
)
def test_build_problem_samples_boundary_preparation(psi_boundary, expected):
    config = RunConfig.model_validate(
        {
            "scenario": "bounded",
            "grid": {"dim": 1, "cells": [16], "extent": [1.0]},
            "params": {"epsilon": 0.1, "bc_mode": "dirichlet"},
            "initial": {"kind": "sine", "c0": 1.0, "amp": 0.3},
            "boundary": {"kind": "constant", "t_boundary": 1.2, "psi_boundary": psi_boundary},
            "t_end": 0.01,
        }
    )
    assert not BoundaryData.constant(1.2, psi_boundary).well_prepared
    assert build_problem(config).boundary_data.well_prepared is expected


def test_problem_kinetic_state_is_well_prepared():
    config = load_config(CONFIG_DIR / "torus_smooth.yaml")
    problem = build_problem(config, CONFIG_DIR)
    state = problem.kinetic_state()
    assert state.time == 0.0
    assert np.array_equal(state.temperature.values, problem.initial.values)
    assert np.array_equal(state.intensity.values[..., 0], problem.initial.values**4)
