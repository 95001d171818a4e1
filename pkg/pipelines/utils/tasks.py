# -*- coding: utf-8 -*-
from pathlib import Path
from typing import Literal, Optional, Union

from prefect import task
from prefeitura_rio.pipelines_utils.logging import log

from pipelines.radiative_transfer.models.config import RunConfig, SweepConfig, load_config


def apply_overrides(
    config: Union[RunConfig, SweepConfig],
    epsilon: Optional[float] = None,
    seed: Optional[int] = None,
    out: Optional[str] = None,
) -> Union[RunConfig, SweepConfig]:
    """Applies the command-line overrides; `epsilon` is ignored for sweeps."""
    if isinstance(config, SweepConfig):
        base = apply_overrides(config.base, None, seed, out)
        return SweepConfig.model_validate(dict(config.model_dump(), base=base.model_dump()))
    if epsilon is not None:
        config = config.with_epsilon(float(epsilon))
    update = {}
    if seed is not None:
        update["seed"] = int(seed)
    if out is not None:
        update["output_dir"] = str(out)
    if update:
        config = RunConfig.model_validate(dict(config.model_dump(), **update))
    return config


@task
def task_load_config(
    config_path: str,
    kind: Literal["run", "sweep"] = "run",
    epsilon: Optional[float] = None,
    seed: Optional[int] = None,
    out: Optional[str] = None,
) -> Union[RunConfig, SweepConfig]:
    """
    Loads and validates a YAML configuration, then applies command-line overrides.

    Args:
        config_path (str): Path to the YAML file.
        kind (Literal["run", "sweep"]): Schema to validate against.
        epsilon (float, optional): Replaces params.epsilon of a run config.
        seed (int, optional): Replaces the seed.
        out (str, optional): Replaces the output directory.

    Returns:
        Union[RunConfig, SweepConfig]: The validated configuration.

    Raises:
        FileNotFoundError: If the file does not exist.
        ValueError: If the file is not a valid configuration.
    """
    log(f"Loading {kind} configuration from {config_path}")
    model = SweepConfig if kind == "sweep" else RunConfig
    config = load_config(config_path, model)
    if epsilon is not None and kind == "sweep":
        log("--epsilon is ignored for sweeps", level="warning")
    return apply_overrides(config, epsilon, seed, out)


@task
def task_prepare_output_dir(config: Union[RunConfig, SweepConfig]) -> str:
    base = config.base if isinstance(config, SweepConfig) else config
    path = Path(base.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    log(f"Writing results to {path.resolve()}")
    return str(path)
