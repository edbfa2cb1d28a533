from pathlib import Path
from typing import Dict, Optional, Union

import structlog
from dotenv import dotenv_values
from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import ConfigError, UnknownExperimentError
from app.experiments.base import RunContext
from app.experiments.router import experiment_router
from app.models.experiment import ExperimentConfig, RunResult

logger = structlog.get_logger(__name__)

RESOLVED_CONFIG = "resolved.conf"
_TOP_LEVEL = {"experiment", "seed", "output_dir"}


def _first_error_key(exc: ValidationError, prefix: str = "") -> Optional[str]:
    errors = exc.errors()
    if not errors or not errors[0].get("loc"):
        return None
    return prefix + ".".join(str(part) for part in errors[0]["loc"])


def parse_config(entries: Dict[str, Optional[str]]) -> ExperimentConfig:
    """Flat ``key = value`` entries; ``<experiment>.<key>`` lines form the parameter block"""
    if "experiment" not in entries or not entries["experiment"]:
        raise ConfigError("missing", key="experiment")
    name = entries["experiment"]
    top: Dict[str, Optional[str]] = {"name": name}
    params: Dict[str, str] = {}
    for key, value in entries.items():
        if key == "experiment":
            continue
        if "." in key:
            section, field = key.split(".", 1)
            if section != name:
                raise ConfigError(f"section '{section}' does not match experiment '{name}'", key=key)
            params[field] = "" if value is None else value
        else:
            top[key] = value
    try:
        return ExperimentConfig(**top, params=params)
    except ValidationError as exc:
        raise ConfigError(exc.errors()[0]["msg"], key=_first_error_key(exc)) from exc


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    return parse_config(dotenv_values(path, interpolate=False))


def _write_resolved(ctx: RunContext) -> Path:
    lines = [
        f"experiment = {ctx.config.name}",
        f"seed = {ctx.config.seed}",
        f"output_dir = {ctx.config.output_dir or ctx.config.name}",
    ]
    lines += [f"{ctx.config.name}.{key} = {value}" for key, value in ctx.params.resolved().items()]
    path = ctx.path(RESOLVED_CONFIG)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return ctx.add(path)


def run_experiment(config: ExperimentConfig) -> RunResult:
    experiment = experiment_router.get(config.name)
    if experiment is None:
        raise UnknownExperimentError(config.name, experiment_router.names)
    try:
        params = experiment.params(**config.params)
    except ValidationError as exc:
        raise ConfigError(exc.errors()[0]["msg"], key=_first_error_key(exc, f"{config.name}.")) from exc

    output_dir = Path(settings.OUTPUT_ROOT) / (config.output_dir or config.name)
    output_dir.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(config=config, params=params, output_dir=output_dir)
    _write_resolved(ctx)

    logger.info("experiment_start", name=config.name, seed=config.seed, output_dir=str(output_dir))
    experiment.handler(ctx)
    logger.info("experiment_done", name=config.name, artifacts=len(ctx.artifacts), **ctx.summary)
    return ctx.result()
