import math
from typing import Optional, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel

from app.core.config import settings
from app.core.errors import EnumerationLimitError, InvalidParameterError
from app.models.boolean import (
    ENUMERATION_LIMIT,
    Bitmask,
    BooleanFn,
    seen_indicator,
    seen_mass,
)
from app.models.distributions import FrozenCoordinate
from app.models.reports import BooleanTransferReport

logger = structlog.get_logger(__name__)


class Influences(BaseModel):
    values: list[float]
    tau: float


class ConditionalMoments(BaseModel):
    seen_mean: float
    seen_second_moment: float
    full_mean: float
    full_second_moment: float


def walsh_hadamard(values: np.ndarray) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform, O(n 2^n)"""
    a = np.array(values, dtype=float, copy=True)
    size = a.shape[0]
    h = 1
    while h < size:
        blocks = a.reshape(-1, 2, h)
        left, right = blocks[:, 0, :].copy(), blocks[:, 1, :]
        blocks[:, 0, :] += right
        blocks[:, 1, :] = left - right
        h *= 2
    return a


def default_degree_constant(d: int) -> float:
    return 1.0 if d <= 1 else float(d) ** (2 * d)


class BooleanService:
    """Fourier analysis on the uniform hypercube and the seen/unseen transfer check"""

    def __init__(self):
        self.gap_constant = settings.BOOLEAN_GAP_CONSTANT

    @staticmethod
    def _check_size(n: int) -> None:
        if n > ENUMERATION_LIMIT:
            raise EnumerationLimitError(n, ENUMERATION_LIMIT)

    def fourier_transform(self, f: BooleanFn, direction: str = "to-fourier") -> BooleanFn:
        """Populate the missing representation: c = H f / 2^n, f = H c"""
        self._check_size(f.n)
        if direction == "to-fourier":
            if f.table is None:
                raise InvalidParameterError("no value table to transform")
            spectrum = walsh_hadamard(f.table) / float(1 << f.n)
            return BooleanFn(n=f.n, table=f.table, spectrum=spectrum)
        if direction == "to-table":
            if f.spectrum is None:
                raise InvalidParameterError("no spectrum to transform")
            return BooleanFn(n=f.n, table=walsh_hadamard(f.spectrum), spectrum=f.spectrum)
        raise InvalidParameterError(f"unknown direction '{direction}'")

    def complete(self, f: BooleanFn) -> BooleanFn:
        if f.spectrum is None:
            return self.fourier_transform(f, "to-fourier")
        if f.table is None:
            return self.fourier_transform(f, "to-table")
        return f

    def influences(self, f: BooleanFn) -> Influences:
        """Inf_i = sum over S containing i of c_S^2; tau is the largest"""
        f = self.complete(f)
        squares = f.spectrum**2
        idx = np.arange(1 << f.n, dtype=np.int64)
        values = [float(squares[((idx >> i) & 1) == 1].sum()) for i in range(f.n)]
        return Influences(values=values, tau=max(values))

    def influences_by_enumeration(self, f: BooleanFn) -> Influences:
        """E_x Var_{x_i} f, from the value table alone"""
        f = self.complete(f)
        idx = np.arange(1 << f.n, dtype=np.int64)
        values = []
        for i in range(f.n):
            flipped = f.table[idx ^ (1 << i)]
            values.append(float(np.mean(((f.table - flipped) / 2.0) ** 2)))
        return Influences(values=values, tau=max(values))

    def variance(self, f: BooleanFn) -> float:
        f = self.complete(f)
        return float(np.sum(f.spectrum[1:] ** 2))

    def normalize_variance(self, f: BooleanFn) -> Tuple[BooleanFn, float]:
        """Scale every nonempty-set coefficient so their squares sum to 1; c_empty is kept"""
        f = self.complete(f)
        var = self.variance(f)
        if var <= 1e-24:
            raise InvalidParameterError("a constant function cannot be variance-normalized")
        scale = 1.0 / math.sqrt(var)
        spectrum = f.spectrum * scale
        spectrum[0] = f.spectrum[0]
        return self.fourier_transform(BooleanFn(n=f.n, spectrum=spectrum), "to-table"), scale

    def restrict(self, f: BooleanFn, k: int, value: int) -> BooleanFn:
        """f with x_k frozen to ``value``: chi_S becomes value * chi_{S minus k} for S containing k"""
        f = self.complete(f)
        if not 0 <= k < f.n or value not in (-1, 1):
            raise InvalidParameterError("restriction needs 0 <= k < n and value in {-1, 1}")
        idx = np.arange(1 << f.n, dtype=np.int64)
        has_k = ((idx >> k) & 1) == 1
        spectrum = np.where(has_k, 0.0, f.spectrum)
        spectrum[idx[has_k] ^ (1 << k)] += value * f.spectrum[has_k]
        return self.fourier_transform(BooleanFn(n=f.n, spectrum=spectrum), "to-table")

    @staticmethod
    def invariance_gap(d: int, beta: float, tau: float, c: Optional[float] = None) -> float:
        """c d beta^(1/3) tau^(1/(8d))"""
        if not 0.0 <= tau <= 1.0 or d < 1 or beta < 1:
            raise InvalidParameterError("need tau in [0,1], d >= 1 and beta >= 1")
        c = settings.BOOLEAN_GAP_CONSTANT if c is None else c
        if tau == 0.0:
            return 0.0
        return c * d * beta ** (1.0 / 3.0) * tau ** (1.0 / (8.0 * d))

    def conditional_moments(
        self, f: BooleanFn, seen: Union[FrozenCoordinate, Bitmask]
    ) -> ConditionalMoments:
        """Exact first and second moments under Q_S (uniform on S) and Q (uniform)"""
        f = self.complete(f)
        inside = seen_indicator(seen, f.n)
        if not inside.any():
            raise InvalidParameterError("seen set is empty")
        seen_values = f.table[inside]
        return ConditionalMoments(
            seen_mean=float(seen_values.mean()),
            seen_second_moment=float(np.mean(seen_values**2)),
            full_mean=float(f.table.mean()),
            full_second_moment=float(np.mean(f.table**2)),
        )

    def boolean_transfer_report(
        self,
        f: BooleanFn,
        seen: Union[FrozenCoordinate, Bitmask],
        c_gap: Optional[float] = None,
        k_d: Optional[float] = None,
    ) -> BooleanTransferReport:
        """Check the low-influence hypothesis Q(S) >= gap, then E_Q f^2 <= K_d Q(S)^(-2d) E_P f^2"""
        f = self.complete(f)
        var = self.variance(f)
        if abs(var - 1.0) > 1e-9:
            raise InvalidParameterError(f"f must be variance-normalized (variance {var:.6g})")
        c_gap = self.gap_constant if c_gap is None else c_gap
        d = max(1, f.degree())
        k_d = default_degree_constant(d) if k_d is None else k_d

        tau = self.influences(f).tau
        mass = seen_mass(seen, f.n)
        gap = self.invariance_gap(d, 1.0, tau, c_gap)
        moments = self.conditional_moments(f, seen)
        coefficient = k_d * mass ** (-2 * d)
        observed = moments.full_second_moment <= coefficient * moments.seen_second_moment + 1e-12

        condition = mass >= gap
        refined = k_d * (mass - gap) ** (-2 * d) if mass > gap else None
        bound = observed if condition else None
        if not condition:
            logger.info("boolean_condition_violated", n=f.n, d=d, tau=tau, gap=gap, seen_mass=mass)

        return BooleanTransferReport(
            n=f.n,
            degree=d,
            seen_mass=mass,
            tau=tau,
            gap=gap,
            gap_constant=c_gap,
            k_d=k_d,
            condition_holds=condition,
            seen_mean=moments.seen_mean,
            seen_second_moment=moments.seen_second_moment,
            full_mean=moments.full_mean,
            full_second_moment=moments.full_second_moment,
            coefficient=coefficient,
            refined_coefficient=refined,
            bound_holds=bound,
            observed_holds=observed,
        )


boolean_service = BooleanService()
