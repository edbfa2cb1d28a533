from typing import List, Optional

from pydantic import BaseModel, Field

from app.models.distributions import Density


class Estimate(BaseModel):
    """Monte Carlo (or exact, stderr 0) estimate of a scalar"""
    value: float
    stderr: float = 0.0
    n_samples: int = 0
    flags: List[str] = Field(default_factory=list)

    @property
    def is_infinite(self) -> bool:
        return "infinite_ratio" in self.flags


class MassEstimate(Estimate):
    method: str = "exact"


class RatioSup(BaseModel):
    """Result of a grid search for sup P(x)/Q(x) together with the searched box"""
    value: float
    argmax: Optional[List[float]] = None
    box_lo: List[float]
    box_hi: List[float]
    method: str = "grid"
    flags: List[str] = Field(default_factory=list)


class BridgeConstruction(BaseModel):
    density: Density
    normalizer: float = 1.0


class LineDegree(BaseModel):
    """Restricted line-degree; ``exceeded`` means the top fitted coefficient was significant"""
    degree: int
    max_degree: int
    exceeded: bool = False

    def __str__(self) -> str:
        return f"> {self.max_degree}" if self.exceeded else str(self.degree)
