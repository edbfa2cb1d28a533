from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator


def _as_points(points, dim: int) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if dim > 1 or arr.size == 1 else arr.reshape(-1, 1)
    return arr


# ---------------------------------------------------------------------------
# Truncation sets
# ---------------------------------------------------------------------------

class Halfspace(BaseModel):
    """{x : normal . x >= offset}"""
    kind: Literal["halfspace"] = "halfspace"
    normal: List[float]
    offset: float = 0.0

    @field_validator("normal")
    @classmethod
    def _nonzero(cls, v: List[float]) -> List[float]:
        if not v or not np.any(np.asarray(v) != 0):
            raise ValueError("halfspace normal must be nonzero")
        return v

    @property
    def dim(self) -> int:
        return len(self.normal)

    def contains(self, points) -> np.ndarray:
        x = _as_points(points, self.dim)
        return x @ np.asarray(self.normal) >= self.offset


class IntervalUnion(BaseModel):
    """Union of disjoint closed intervals of the real line, sorted left to right"""
    kind: Literal["intervals"] = "intervals"
    intervals: List[Tuple[float, float]]

    @field_validator("intervals")
    @classmethod
    def _disjoint_ordered(cls, v: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
        if not v:
            raise ValueError("interval union must contain at least one interval")
        for a, b in v:
            if not a < b:
                raise ValueError(f"interval [{a}, {b}] is empty")
        for (_, b0), (a1, _) in zip(v, v[1:]):
            if not b0 < a1:
                raise ValueError("intervals must be disjoint and ordered")
        return v

    @property
    def dim(self) -> int:
        return 1

    def contains(self, points) -> np.ndarray:
        x = _as_points(points, 1)[:, 0]
        inside = np.zeros(x.shape, dtype=bool)
        for a, b in self.intervals:
            inside |= (x >= a) & (x <= b)
        return inside

    @classmethod
    def real_line(cls) -> "IntervalUnion":
        return cls(intervals=[(-np.inf, np.inf)])

    @classmethod
    def half_line(cls, lo: float) -> "IntervalUnion":
        return cls(intervals=[(lo, np.inf)])


class Box(BaseModel):
    kind: Literal["box"] = "box"
    lo: List[float]
    hi: List[float]

    @model_validator(mode="after")
    def _ordered(self) -> "Box":
        if len(self.lo) != len(self.hi) or not self.lo:
            raise ValueError("box bounds must have equal, positive length")
        if not np.all(np.asarray(self.lo) < np.asarray(self.hi)):
            raise ValueError("box requires lo < hi componentwise")
        return self

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, points) -> np.ndarray:
        x = _as_points(points, self.dim)
        return np.all((x >= np.asarray(self.lo)) & (x <= np.asarray(self.hi)), axis=1)


class FrozenCoordinate(BaseModel):
    """{x in {-1,1}^n : x_index = value}"""
    kind: Literal["frozen"] = "frozen"
    index: int = Field(ge=0)
    value: Literal[-1, 1] = 1

    @property
    def dim(self) -> Optional[int]:
        return None

    def contains(self, points) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        return x[:, self.index] == self.value


TruncationSet = Annotated[
    Union[Halfspace, IntervalUnion, Box, FrozenCoordinate], Field(discriminator="kind")
]


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------

def _check_spd(cov: List[List[float]], dim: int) -> None:
    c = np.asarray(cov, dtype=float)
    if c.shape != (dim, dim):
        raise ValueError(f"covariance must be {dim}x{dim}, got {c.shape}")
    if not np.allclose(c, c.T, rtol=0, atol=1e-12):
        raise ValueError("covariance must be symmetric")
    if np.linalg.eigvalsh(c).min() <= 0:
        raise ValueError("covariance must be positive definite")


class Gaussian(BaseModel):
    kind: Literal["gaussian"] = "gaussian"
    mean: List[float]
    cov: List[List[float]]

    @model_validator(mode="after")
    def _spd(self) -> "Gaussian":
        _check_spd(self.cov, len(self.mean))
        return self

    @classmethod
    def standard(cls, dim: int = 1, mean: Optional[List[float]] = None) -> "Gaussian":
        return cls(mean=list(mean) if mean is not None else [0.0] * dim,
                   cov=np.eye(dim).tolist())

    @property
    def dim(self) -> int:
        return len(self.mean)

    @property
    def label(self) -> str:
        return f"gaussian(mean={self.mean})"


class UniformBox(BaseModel):
    kind: Literal["uniform"] = "uniform"
    lo: List[float]
    hi: List[float]

    @model_validator(mode="after")
    def _ordered(self) -> "UniformBox":
        if len(self.lo) != len(self.hi) or not self.lo:
            raise ValueError("uniform box bounds must have equal, positive length")
        if not np.all(np.asarray(self.lo) < np.asarray(self.hi)):
            raise ValueError("uniform box requires lo < hi componentwise")
        return self

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(np.asarray(self.hi) - np.asarray(self.lo)))

    @property
    def label(self) -> str:
        return f"uniform({self.lo},{self.hi})"


class TruncatedGaussian(BaseModel):
    kind: Literal["truncated_gaussian"] = "truncated_gaussian"
    mean: List[float]
    cov: List[List[float]]
    truncation: TruncationSet

    @model_validator(mode="after")
    def _spd(self) -> "TruncatedGaussian":
        _check_spd(self.cov, len(self.mean))
        set_dim = self.truncation.dim
        if set_dim is not None and set_dim != len(self.mean):
            raise ValueError("truncation set dimension does not match the mean")
        return self

    @property
    def dim(self) -> int:
        return len(self.mean)

    @property
    def label(self) -> str:
        return f"truncated_gaussian(mean={self.mean},set={self.truncation.kind})"


class Bridge1D(BaseModel):
    """Log-concave glue of N(0,1) and N(mu,1) with a flat slab between the modes"""
    kind: Literal["bridge1d"] = "bridge1d"
    mu: float

    @property
    def dim(self) -> int:
        return 1

    @property
    def label(self) -> str:
        return f"bridge1d(mu={self.mu:g})"


class BridgeND(BaseModel):
    """N(0,I) / N(mu,I) glue, built along e1 and rotated onto mu"""
    kind: Literal["bridgend"] = "bridgend"
    mu: List[float]

    @property
    def dim(self) -> int:
        return len(self.mu)

    @property
    def label(self) -> str:
        return f"bridgend(|mu|={float(np.linalg.norm(self.mu)):g})"


Factor1D = Annotated[Union[Gaussian, UniformBox], Field(discriminator="kind")]


class BridgeProduct(BaseModel):
    """Glue of a log-concave product density and its translate by shift * e1"""
    kind: Literal["bridge_product"] = "bridge_product"
    factors: List[Factor1D]
    shift: float

    @model_validator(mode="after")
    def _modes_at_zero(self) -> "BridgeProduct":
        if not self.factors:
            raise ValueError("product bridge needs at least one factor")
        for factor in self.factors:
            if factor.dim != 1:
                raise ValueError("product bridge factors must be one-dimensional")
            if isinstance(factor, Gaussian) and factor.mean[0] != 0.0:
                raise ValueError("gaussian factors must have mode 0")
            if isinstance(factor, UniformBox) and not factor.lo[0] <= 0.0 <= factor.hi[0]:
                raise ValueError("uniform factors must contain 0")
        return self

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def label(self) -> str:
        return f"bridge_product(shift={self.shift:g})"


class BridgeGaussianCov(BaseModel):
    """N(0,S) / N(gamma e1, S) glue: whitened n-D bridge pushed through S^(1/2)"""
    kind: Literal["bridge_gaussian_cov"] = "bridge_gaussian_cov"
    cov: List[List[float]]
    gamma: float

    @model_validator(mode="after")
    def _spd(self) -> "BridgeGaussianCov":
        _check_spd(self.cov, len(self.cov))
        return self

    @property
    def dim(self) -> int:
        return len(self.cov)

    @property
    def label(self) -> str:
        return f"bridge_gaussian_cov(gamma={self.gamma:g})"


Component1D = Annotated[
    Union[Gaussian, UniformBox, TruncatedGaussian, Bridge1D], Field(discriminator="kind")
]


class Product(BaseModel):
    kind: Literal["product"] = "product"
    factors: List[Component1D]

    @model_validator(mode="after")
    def _one_dimensional(self) -> "Product":
        if not self.factors or any(f.dim != 1 for f in self.factors):
            raise ValueError("product factors must be one-dimensional densities")
        return self

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def label(self) -> str:
        return "product(" + ",".join(f.kind for f in self.factors) + ")"


class PointMass(BaseModel):
    """Degenerate law used as a task prior; sampling only"""
    kind: Literal["point"] = "point"
    value: List[float]

    @property
    def dim(self) -> int:
        return len(self.value)

    @property
    def label(self) -> str:
        return f"point({self.value})"


Density = Annotated[
    Union[
        Gaussian,
        UniformBox,
        TruncatedGaussian,
        Bridge1D,
        BridgeND,
        BridgeProduct,
        BridgeGaussianCov,
        Product,
        PointMass,
    ],
    Field(discriminator="kind"),
]

LOG_CONCAVE_KINDS = frozenset(
    {"gaussian", "uniform", "bridge1d", "bridgend", "bridge_product", "bridge_gaussian_cov"}
)
