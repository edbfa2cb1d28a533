from itertools import product as cartesian
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

Basis = Literal["monomial", "legendre"]


def graded_lex(dim: int, degree: int) -> List[Tuple[int, ...]]:
    """All multi-indices of total degree <= ``degree``: by total degree, then x1 before x2 ..."""
    exps = [e for e in cartesian(range(degree + 1), repeat=dim) if sum(e) <= degree]
    return sorted(exps, key=lambda e: (sum(e), tuple(-v for v in e)))


class McSpec(BaseModel):
    n_samples: int = Field(default=100_000, ge=1)
    seed: int = 0


class MultiPoly(BaseModel):
    """Polynomial of total degree <= ``degree`` in the monomial or box-orthonormal basis.

    The box-orthonormal basis is the tensor product of sqrt(2k+1) P_k(t) with t the affine
    image of the box onto [-1, 1]; it is orthonormal for the uniform law on the box.
    """

    dim: int = Field(ge=1)
    degree: int = Field(ge=0)
    basis: Basis = "monomial"
    exponents: List[Tuple[int, ...]]
    coefficients: List[float]
    box_lo: Optional[List[float]] = None
    box_hi: Optional[List[float]] = None
    residual: Optional[float] = None

    @model_validator(mode="after")
    def _consistent(self) -> "MultiPoly":
        if len(self.exponents) != len(self.coefficients):
            raise ValueError("one coefficient per multi-index is required")
        for e in self.exponents:
            if len(e) != self.dim or min(e) < 0:
                raise ValueError(f"multi-index {e} does not match dimension {self.dim}")
            if sum(e) > self.degree:
                raise ValueError(f"multi-index {e} exceeds total degree {self.degree}")
        if self.basis == "legendre":
            if self.box_lo is None or self.box_hi is None:
                raise ValueError("the orthonormal basis needs a box")
            if len(self.box_lo) != self.dim or len(self.box_hi) != self.dim:
                raise ValueError("box dimension does not match the polynomial")
            if not np.all(np.asarray(self.box_lo) < np.asarray(self.box_hi)):
                raise ValueError("box requires lo < hi componentwise")
        return self

    @classmethod
    def from_terms(
        cls,
        terms: Dict[Tuple[int, ...], float],
        dim: int,
        degree: Optional[int] = None,
        basis: Basis = "monomial",
        box_lo: Optional[List[float]] = None,
        box_hi: Optional[List[float]] = None,
    ) -> "MultiPoly":
        deg = degree if degree is not None else max((sum(e) for e in terms), default=0)
        ordered = [e for e in graded_lex(dim, deg) if e in terms]
        return cls(
            dim=dim,
            degree=deg,
            basis=basis,
            exponents=ordered,
            coefficients=[float(terms[e]) for e in ordered],
            box_lo=box_lo,
            box_hi=box_hi,
        )

    @classmethod
    def zero(cls, dim: int) -> "MultiPoly":
        return cls(dim=dim, degree=0, exponents=[], coefficients=[])

    @property
    def terms(self) -> Dict[Tuple[int, ...], float]:
        return dict(zip(self.exponents, self.coefficients))

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self.coefficients)

    def __sub__(self, other: "MultiPoly") -> "MultiPoly":
        if other.dim != self.dim:
            raise ValueError("cannot subtract polynomials of different dimension")
        if other.basis != self.basis or other.box_lo != self.box_lo or other.box_hi != self.box_hi:
            raise ValueError("convert both polynomials to the same basis before subtracting")
        terms = self.terms
        for e, c in other.terms.items():
            terms[e] = terms.get(e, 0.0) - c
        return MultiPoly.from_terms(
            terms,
            self.dim,
            max(self.degree, other.degree),
            self.basis,
            self.box_lo,
            self.box_hi,
        )
