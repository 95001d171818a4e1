# -*- coding: utf-8 -*-
"""
Invariant suites run by the selftest flow. Every suite returns a result dict
with its worst observed metric and the tolerance it is held to.
"""
import json
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
from prefect import task
from prefect.engine import signals
from prefect.triggers import all_finished
from prefeitura_rio.pipelines_utils.logging import log

from pipelines.radiative_transfer.models.core import (
    BoundaryMode,
    IntensityField,
    KineticState,
    Params,
    TemperatureField,
    make_grid,
    well_prepared_init,
)
from pipelines.radiative_transfer.models.diagnostics import lmtg_check
from pipelines.radiative_transfer.models.kinetic_solver import (
    KineticSolverConfig,
    advance,
    stable_dt,
    step_relaxation,
)
from pipelines.radiative_transfer.models.quadrature import (
    angular_average,
    build_quadrature,
    reflection_map,
)


def _result(name: str, metric: float, tolerance: float, **detail) -> dict:
    passed = bool(np.isfinite(metric) and metric <= tolerance)
    log(f"selftest {name}: metric {metric:.3e}, tolerance {tolerance:.1e}, passed={passed}")
    return {
        "name": name,
        "passed": passed,
        "metric": float(metric),
        "tolerance": tolerance,
        "detail": detail,
    }


def suite_quadrature_moments(seed: int = 0) -> dict:
    worst = {}
    for n_polar, n_azimuth in ((2, 4), (4, 8), (8, 8)):
        errors = build_quadrature(n_polar, n_azimuth).moment_errors()
        worst[f"{n_polar}x{n_azimuth}"] = max(errors.values())
    return _result("quadrature_moments", max(worst.values()), 1e-12, rules=worst)


def suite_reflection_involution(seed: int = 0) -> dict:
    """Each box reflection is a permutation of the nodes that squares to the identity."""
    quad = build_quadrature(8, 8)
    worst = 0.0
    for axis in range(3):
        for sign in (-1.0, 1.0):
            n = np.zeros(3)
            n[axis] = sign
            perm = reflection_map(quad, n)
            if not np.array_equal(perm[perm], np.arange(quad.n_nodes)):
                worst = np.inf
            expected = quad.nodes - 2.0 * np.outer(quad.nodes @ n, n)
            worst = max(worst, float(np.max(np.abs(quad.nodes[perm] - expected))))
    return _result("reflection_involution", worst, 1e-12)


def suite_equilibrium(seed: int = 0) -> dict:
    """Uniform T = 1.3 with psi = T^4 on a 64-cell torus stays put for 500 steps."""
    grid = make_grid(1, [64], [1.0], [True])
    quad = build_quadrature(8, 8)
    params = Params(epsilon=0.1, bc_mode=BoundaryMode.TORUS)
    config = KineticSolverConfig()
    state = well_prepared_init(TemperatureField(grid, np.full(grid.shape, 1.3)), quad.n_nodes)
    dt = stable_dt(grid, quad, params, config)
    final = advance(state, 500 * dt, params, config, quad)
    drift = max(
        float(np.max(np.abs(final.temperature.values - 1.3))),
        float(np.max(np.abs(final.intensity.values - 1.3**4))),
    )
    return _result("equilibrium", drift, 1e-11, steps=500, dt=dt)


def suite_relaxation_conservation(seed: int = 0) -> dict:
    """T + <psi> is unchanged by the relaxation sub-step on 10^4 random cells."""
    rng = np.random.default_rng(seed)
    n_cells = 10_000
    grid = make_grid(1, [n_cells], [1.0], [True])
    quad = build_quadrature(4, 8)
    worst = 0.0
    for epsilon, dt in ((1.0, 1e-2), (0.1, 1e-3), (1e-3, 1e-4)):
        temperature = rng.uniform(0.1, 1.5, size=n_cells)
        intensity = rng.uniform(0.0, 2.0, size=(n_cells, quad.n_nodes))
        state = KineticState(
            0.0, TemperatureField(grid, temperature), IntensityField(grid, intensity)
        )
        T1, psi1, _ = step_relaxation(state, dt, Params(epsilon=epsilon), quad)
        before = temperature + angular_average(intensity, quad)
        after = T1.values + angular_average(psi1.values, quad)
        worst = max(worst, float(np.max(np.abs(after - before))))
    return _result("relaxation_conservation", worst, 1e-10, cells=n_cells)


def suite_lmtg(seed: int = 0) -> dict:
    """Lower bound of the relative-entropy temperature part on 10^5 random admissible triples."""
    rng = np.random.default_rng(seed)
    n_samples = 100_000
    c = rng.uniform(1e-3, 2.0, size=n_samples)
    A = c + rng.uniform(0.0, 3.0, size=n_samples)
    g = rng.uniform(-1.0, 1.0, size=n_samples) * np.where(
        rng.random(n_samples) < 0.5, A, 3.0 * A
    )
    g = np.maximum(g, -A)
    passed, margin = lmtg_check(A, g, c)
    violations = int(np.count_nonzero(~passed))
    return _result(
        "lmtg", violations, 0, samples=n_samples, min_margin=float(np.min(margin))
    )


SUITES: Dict[str, Callable[[int], dict]] = {
    "quadrature_moments": suite_quadrature_moments,
    "reflection_involution": suite_reflection_involution,
    "equilibrium": suite_equilibrium,
    "relaxation_conservation": suite_relaxation_conservation,
    "lmtg": suite_lmtg,
}


@task
def task_list_suites(only: Optional[List[str]] = None) -> List[str]:
    names = list(only) if only else list(SUITES)
    unknown = sorted(set(names) - set(SUITES))
    if unknown:
        raise ValueError(f"Unknown selftest suites {unknown}; available: {list(SUITES)}")
    return names


@task
def task_run_suite(name: str, seed: Optional[int] = None) -> dict:
    return SUITES[name](0 if seed is None else int(seed))


@task(trigger=all_finished)
def task_write_selftest_report(results: List, names: List[str], out: Optional[str] = None) -> dict:
    """
    Writes selftest.json.

    Raises:
        signals.FAIL: if a suite failed its tolerance or raised.
    """
    suites = []
    for name, result in zip(names, results):
        if isinstance(result, dict):
            suites.append(result)
        else:
            suites.append({"name": name, "passed": False, "error": str(result)})
    report = {"passed": all(s["passed"] for s in suites), "suites": suites}
    output = Path(out or "output")
    output.mkdir(parents=True, exist_ok=True)
    (output / "selftest.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    failed = [s["name"] for s in suites if not s["passed"]]
    if failed:
        raise signals.FAIL(f"Selftest suites failed: {failed}")
    log(f"All {len(suites)} selftest suites passed")
    return report
