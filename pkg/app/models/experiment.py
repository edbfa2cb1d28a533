from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.arrays import FloatArray


class ExperimentConfig(BaseModel):
    """One experiment run; ``params`` holds the dotted ``<experiment>.<key>`` entries"""

    model_config = ConfigDict(extra="forbid")

    name: str
    seed: int = 0
    output_dir: Optional[Path] = None
    params: Dict[str, str] = Field(default_factory=dict)


class Heatmap(BaseModel):
    """Values on a regular grid over [x_lo, x_hi] x [y_lo, y_hi]; rows run along y"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    values: FloatArray
    value_range: float = Field(gt=0)
    title: str = ""

    @model_validator(mode="after")
    def _grid(self) -> "Heatmap":
        if self.values.ndim != 2 or min(self.values.shape) < 2:
            raise ValueError("heatmap resolution must be at least 2 per axis")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("heatmap values must be finite")
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ValueError("heatmap extent requires lo < hi")
        return self

    @classmethod
    def from_function(
        cls, fn, lo: List[float], hi: List[float], resolution: int, value_range: float, title: str = ""
    ) -> "Heatmap":
        """Evaluate ``fn`` on the (resolution^2, 2) grid of cell centres"""
        xs = lo[0] + (np.arange(resolution) + 0.5) * (hi[0] - lo[0]) / resolution
        ys = lo[1] + (np.arange(resolution) + 0.5) * (hi[1] - lo[1]) / resolution
        gx, gy = np.meshgrid(xs, ys)
        points = np.column_stack([gx.ravel(), gy.ravel()])
        values = np.asarray(fn(points), dtype=float).reshape(resolution, resolution)
        return cls(
            x_lo=lo[0], x_hi=hi[0], y_lo=lo[1], y_hi=hi[1], values=values, value_range=value_range, title=title
        )


class RunResult(BaseModel):
    name: str
    output_dir: Path
    artifacts: List[Path] = Field(default_factory=list)
    summary: Dict[str, Any] = Field(default_factory=dict)
