from typing import Annotated, Dict, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.arrays import BoolArray, FloatArray
from app.models.distributions import FrozenCoordinate

# Point i of the hypercube has x_j = -1 exactly when bit j of i is set.
ENUMERATION_LIMIT = 24


def hypercube_points(n: int) -> np.ndarray:
    """(2^n, n) int8 matrix of +-1 coordinates in table order"""
    idx = np.arange(1 << n, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n, dtype=np.int64)) & 1
    return (1 - 2 * bits).astype(np.int8)


def popcounts(n: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    counts = np.zeros(1 << n, dtype=np.int64)
    for j in range(n):
        counts += (idx >> j) & 1
    return counts


class BooleanFn(BaseModel):
    """Real function on {-1,1}^n as a value table, a dense Fourier spectrum, or both"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int = Field(ge=1)
    table: Optional[FloatArray] = None
    spectrum: Optional[FloatArray] = None

    @model_validator(mode="after")
    def _shapes(self) -> "BooleanFn":
        if self.table is None and self.spectrum is None:
            raise ValueError("a Boolean function needs a table or a spectrum")
        size = 1 << self.n
        for name in ("table", "spectrum"):
            arr = getattr(self, name)
            if arr is not None and np.shape(arr) != (size,):
                raise ValueError(f"{name} must have 2^n = {size} entries")
        return self

    @classmethod
    def from_fourier(cls, n: int, coefficients: Dict[int, float]) -> "BooleanFn":
        spectrum = np.zeros(1 << n)
        for mask, c in coefficients.items():
            spectrum[int(mask)] = c
        return cls(n=n, spectrum=spectrum)

    @classmethod
    def from_callable(cls, n: int, fn) -> "BooleanFn":
        """Tabulate ``fn`` applied to the (2^n, n) matrix of hypercube points"""
        values = np.asarray(fn(hypercube_points(n)), dtype=float).ravel()
        return cls(n=n, table=values)

    @property
    def fourier(self) -> Dict[int, float]:
        """Sparse view of the spectrum: bitmask of S -> c_S"""
        if self.spectrum is None:
            raise ValueError("spectrum not computed; run the Fourier transform first")
        nonzero = np.flatnonzero(self.spectrum)
        return {int(m): float(self.spectrum[m]) for m in nonzero}

    def degree(self, tol: float = 1e-12) -> int:
        if self.spectrum is None:
            raise ValueError("spectrum not computed; run the Fourier transform first")
        support = np.abs(self.spectrum) > tol
        if not np.any(support):
            return 0
        return int(popcounts(self.n)[support].max())


class Bitmask(BaseModel):
    """Explicit seen subset of the hypercube, one flag per table index"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: Literal["bitmask"] = "bitmask"
    mask: BoolArray

    @model_validator(mode="after")
    def _nonempty(self) -> "Bitmask":
        if not self.mask.any():
            raise ValueError("seen set must be nonempty")
        return self


SeenSet = Annotated[Union[FrozenCoordinate, Bitmask], Field(discriminator="kind")]


def seen_indicator(seen: Union[FrozenCoordinate, Bitmask], n: int) -> np.ndarray:
    if isinstance(seen, Bitmask):
        if seen.mask.shape != (1 << n,):
            raise ValueError(f"seen mask must have 2^n = {1 << n} entries")
        return seen.mask
    if seen.index >= n:
        raise ValueError(f"frozen coordinate {seen.index} out of range for n={n}")
    bit = (np.arange(1 << n, dtype=np.int64) >> seen.index) & 1
    return bit == (0 if seen.value == 1 else 1)


def seen_mass(seen: Union[FrozenCoordinate, Bitmask], n: int) -> float:
    if isinstance(seen, FrozenCoordinate):
        return 0.5
    return float(seen_indicator(seen, n).mean())
