from typing import List, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.arrays import FloatArray
from app.models.distributions import Density


class PromptDistribution(BaseModel):
    """Laws of the in-context examples, the query point and the task vector w"""
    P_X: Density
    P_X_query: Density
    P_H: Density
    N: int = Field(ge=1)

    @model_validator(mode="after")
    def _dims(self) -> "PromptDistribution":
        if not self.P_X.dim == self.P_X_query.dim == self.P_H.dim:
            raise ValueError("example, query and task laws must share a dimension")
        return self

    @property
    def n(self) -> int:
        return self.P_X.dim


class Prompt(BaseModel):
    """(n+1) x (N+1) prompt matrix with columns (x_i; y_i) and a final (x_query; 0)"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    E: FloatArray
    w: FloatArray
    x_query: FloatArray

    @property
    def n(self) -> int:
        return self.E.shape[0] - 1

    @property
    def N(self) -> int:
        return self.E.shape[1] - 1

    @property
    def target(self) -> float:
        return float(self.w @ self.x_query)


class LSAParams(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    W_PV: FloatArray
    W_KQ: FloatArray
    rho: float = Field(gt=0)

    @model_validator(mode="after")
    def _square(self) -> "LSAParams":
        if self.W_PV.ndim != 2 or self.W_PV.shape != self.W_KQ.shape or self.W_PV.shape[0] != self.W_PV.shape[1]:
            raise ValueError("W_PV and W_KQ must be square matrices of the same size")
        return self

    @classmethod
    def zeros(cls, n: int, rho: float) -> "LSAParams":
        return cls(W_PV=np.zeros((n + 1, n + 1)), W_KQ=np.zeros((n + 1, n + 1)), rho=rho)

    def copy_with(self, W_PV: np.ndarray, W_KQ: np.ndarray) -> "LSAParams":
        return LSAParams(W_PV=W_PV, W_KQ=W_KQ, rho=self.rho)


class InitSpec(BaseModel):
    """``aligned`` starts at scale * (e_{n+1} e_{n+1}^T, [[I, 0], [0, 0]]); zero is a saddle"""
    kind: Literal["zeros", "random", "aligned"] = "aligned"
    scale: float = 0.1


class TrainingTrace(BaseModel):
    steps: List[int] = Field(default_factory=list)
    losses: List[float] = Field(default_factory=list)
    grad_norms: List[float] = Field(default_factory=list)

    def record(self, step: int, loss: float, grad_norm: float) -> None:
        self.steps.append(step)
        self.losses.append(loss)
        self.grad_norms.append(grad_norm)

    def rows(self) -> List[dict]:
        return [
            {"step": s, "loss": l, "grad_norm": g}
            for s, l, g in zip(self.steps, self.losses, self.grad_norms)
        ]
