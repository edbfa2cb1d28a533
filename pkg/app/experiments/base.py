import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Type

from pydantic import BaseModel, ConfigDict, field_validator

from app.models.experiment import ExperimentConfig, RunResult


class ExperimentParams(BaseModel):
    """Parameter block of one experiment; list fields accept comma-separated strings"""

    model_config = ConfigDict(extra="forbid")

    @field_validator("*", mode="before")
    @classmethod
    def _split_lists(cls, value: Any, info) -> Any:
        annotation = cls.model_fields[info.field_name].annotation
        if isinstance(value, str) and typing.get_origin(annotation) in (list, List):
            return [v.strip() for v in value.split(",") if v.strip()]
        return value

    def resolved(self) -> Dict[str, str]:
        out = {}
        for key, value in self.model_dump().items():
            if isinstance(value, (list, tuple)):
                out[key] = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
            elif isinstance(value, float):
                out[key] = repr(value)
            else:
                out[key] = str(value)
        return out


@dataclass
class RunContext:
    config: ExperimentConfig
    params: ExperimentParams
    output_dir: Path
    artifacts: List[Path] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.config.seed

    def path(self, filename: str) -> Path:
        return self.output_dir / filename

    def add(self, path: Path) -> Path:
        self.artifacts.append(path)
        return path

    def result(self) -> RunResult:
        return RunResult(
            name=self.config.name, output_dir=self.output_dir, artifacts=self.artifacts, summary=self.summary
        )


@dataclass
class Experiment:
    name: str
    description: str
    params: Type[ExperimentParams]
    handler: Callable[[RunContext], None]


class ExperimentRouter:
    """Named experiments, registered with a decorator and merged with ``include_router``"""

    def __init__(self):
        self.experiments: Dict[str, Experiment] = {}

    def experiment(self, name: str, params: Type[ExperimentParams], description: str = ""):
        def decorator(handler: Callable[[RunContext], None]):
            self.experiments[name] = Experiment(
                name=name, description=description or (handler.__doc__ or "").strip(), params=params, handler=handler
            )
            return handler

        return decorator

    def include_router(self, other: "ExperimentRouter") -> None:
        self.experiments.update(other.experiments)

    def get(self, name: str) -> Optional[Experiment]:
        return self.experiments.get(name)

    @property
    def names(self) -> List[str]:
        return sorted(self.experiments)
