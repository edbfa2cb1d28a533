import math
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.arrays import FloatArray


class LinearTarget(BaseModel):
    """f*(x) = bias + sum_i coefficients[i] x_i on the hypercube"""
    bias: float = 0.0
    coefficients: List[float]

    @property
    def n(self) -> int:
        return len(self.coefficients)

    @classmethod
    def dictator(cls, n: int, k: int) -> "LinearTarget":
        c = [0.0] * n
        c[k] = 1.0
        return cls(coefficients=c)

    @classmethod
    def all_ones(cls, n: int) -> "LinearTarget":
        return cls(coefficients=[1.0] * n)


class DiagonalLinearNet(BaseModel):
    """b + sum_i (prod_l w[l, i]) x_i"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    b: float = 0.0
    w: FloatArray

    @model_validator(mode="after")
    def _shape(self) -> "DiagonalLinearNet":
        if self.w.ndim != 2 or self.w.shape[0] < 2:
            raise ValueError("weights must be an L x n matrix with depth L >= 2")
        if not np.all(np.isfinite(self.w)) or not math.isfinite(self.b):
            raise ValueError("network parameters must be finite")
        return self

    @property
    def depth(self) -> int:
        return self.w.shape[0]

    @property
    def n(self) -> int:
        return self.w.shape[1]

    @property
    def effective(self) -> np.ndarray:
        """pi_i = prod_l w[l, i]"""
        return np.prod(self.w, axis=0)


class GOTUTrace(BaseModel):
    times: List[float] = Field(default_factory=list)
    seen_loss: List[float] = Field(default_factory=list)
    full_loss: List[float] = Field(default_factory=list)
    tau: List[float] = Field(default_factory=list)
    fhat_k: List[float] = Field(default_factory=list)
    k: int
    threshold: float
    transfer_constant: float
    t_star: Optional[float] = None
    halvings: int = 0
    final_net: Optional[DiagonalLinearNet] = None

    def record(self, t: float, seen: float, full: float, tau: float, fhat: float) -> None:
        self.times.append(t)
        self.seen_loss.append(seen)
        self.full_loss.append(full)
        self.tau.append(tau)
        self.fhat_k.append(fhat)

    def rows(self) -> List[dict]:
        return [
            {"t": t, "L_S": s, "L": f, "tau": tau, "fhat_k": h}
            for t, s, f, tau, h in zip(self.times, self.seen_loss, self.full_loss, self.tau, self.fhat_k)
        ]


class GOTURunSummary(BaseModel):
    n: int
    L: int
    alpha: float
    seed: int
    t_star: Optional[float]


class GOTUScaling(BaseModel):
    runs: List[GOTURunSummary]
    ns: List[int]
    median_t_star: List[Optional[float]]
    slope_vs_log_n: Optional[float] = None
