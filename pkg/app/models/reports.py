import math
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

from app.models.estimates import BridgeConstruction

TRANSFER_CSV_COLUMNS = [
    "kind",
    "d",
    "alpha",
    "beta",
    "C",
    "coefficient",
    "lhs",
    "lhs_se",
    "rhs",
    "rhs_se",
    "satisfied",
    "shift_kind",
    "bridge",
    "flags",
]


class HolderPair(BaseModel):
    """Conjugate exponents with 1/alpha + 1/beta = 1 (1/inf = 0)"""
    alpha: float = math.inf
    beta: float = 1.0

    @model_validator(mode="after")
    def _conjugate(self) -> "HolderPair":
        if self.alpha < 1 or self.beta < 1:
            raise ValueError("Holder exponents must lie in [1, inf]")
        total = (0.0 if math.isinf(self.alpha) else 1.0 / self.alpha) + (
            0.0 if math.isinf(self.beta) else 1.0 / self.beta
        )
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"1/alpha + 1/beta = {total}, expected 1")
        return self

    @classmethod
    def from_alpha(cls, alpha: float) -> "HolderPair":
        if math.isinf(alpha):
            return cls(alpha=math.inf, beta=1.0)
        if alpha == 1:
            return cls(alpha=1.0, beta=math.inf)
        return cls(alpha=alpha, beta=alpha / (alpha - 1.0))


class Coefficient(BaseModel):
    value: float
    log_value: float
    flags: List[str] = Field(default_factory=list)

    @classmethod
    def from_log(cls, log_value: float, flags: Optional[List[str]] = None) -> "Coefficient":
        value = math.inf if log_value > 709.0 else math.exp(log_value)
        return cls(value=value, log_value=log_value, flags=flags or [])


class TransferRatio(BaseModel):
    """E_Q|f|^p against E_P|f|^p; ``ratio`` is None when the denominator is degenerate"""
    ratio: Optional[float]
    lhs: float
    lhs_se: float = 0.0
    rhs: float
    rhs_se: float = 0.0
    flags: List[str] = Field(default_factory=list)


class CatalogEntry(BaseModel):
    kind: str
    degree: int
    bridge: BridgeConstruction
    coefficient: float


class EnsembleResult(BaseModel):
    degree: int
    count: int
    seed: int
    max_value: float
    worst_index: int
    values: List[float]


class TransferReport(BaseModel):
    """Both sides of a transfer inequality, with the theoretical coefficient that links them"""
    kind: str
    degree: int
    holder: HolderPair = Field(default_factory=HolderPair)
    constant: float
    bridge: str = "target-is-log-concave"
    coefficient: float
    lhs: float
    lhs_se: float = 0.0
    rhs: float
    rhs_se: float = 0.0
    satisfied: bool = False
    shift_kind: Optional[str] = None
    flags: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _decide(self) -> "TransferReport":
        slack = 3.0 * math.sqrt(self.lhs_se**2 + self.rhs_se**2)
        self.satisfied = bool(self.lhs <= self.rhs + slack)
        return self

    def csv_row(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "d": self.degree,
            "alpha": self.holder.alpha,
            "beta": self.holder.beta,
            "C": self.constant,
            "coefficient": self.coefficient,
            "lhs": self.lhs,
            "lhs_se": self.lhs_se,
            "rhs": self.rhs,
            "rhs_se": self.rhs_se,
            "satisfied": self.satisfied,
            "shift_kind": self.shift_kind or "",
            "bridge": self.bridge,
            "flags": ";".join(self.flags),
        }


class BooleanTransferReport(BaseModel):
    n: int
    degree: int
    seen_mass: float
    tau: float
    gap: float
    gap_constant: float
    k_d: float
    condition_holds: bool
    seen_mean: float
    seen_second_moment: float
    full_mean: float
    full_second_moment: float
    coefficient: Optional[float] = None
    refined_coefficient: Optional[float] = None
    bound_holds: Optional[bool] = None
    observed_holds: bool

    @property
    def status(self) -> str:
        if not self.condition_holds:
            return "condition violated"
        return "satisfied" if self.bound_holds else "bound fails"


class TruncatedTransferReport(BaseModel):
    alpha: float
    constant: float
    full_mse: float
    full_se: float = 0.0
    truncated_mse: float
    truncated_se: float = 0.0
    forward: TransferReport
    reverse: TransferReport
    method: str = "quadrature"
