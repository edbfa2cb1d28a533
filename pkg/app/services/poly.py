from math import comb
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from numpy.polynomial import Legendre, Polynomial
from numpy.polynomial import chebyshev as cheb
from numpy.polynomial import legendre as leg

from app.core.config import settings
from app.core.errors import (
    DimensionMismatchError,
    InvalidParameterError,
    NonFiniteValueError,
    RankDeficientError,
)
from app.core.rng import chunk_sizes, generator
from app.models.distributions import Density
from app.models.estimates import Estimate, LineDegree
from app.models.polynomial import Basis, McSpec, MultiPoly, graded_lex
from app.services.dist import dist_service

logger = structlog.get_logger(__name__)

PointFunction = Callable[[np.ndarray], np.ndarray]


def _box_affine(lo: Sequence[float], hi: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    return (lo + hi) / 2.0, (hi - lo) / 2.0


def _orthonormal_vander(t: np.ndarray, degree: int) -> np.ndarray:
    return leg.legvander(t, degree) * np.sqrt(2.0 * np.arange(degree + 1) + 1.0)


class PolynomialService:
    """Evaluation, basis conversion, least squares and Monte Carlo functionals of MultiPoly"""

    def __init__(self):
        self.default_ridge = settings.DEFAULT_RIDGE
        self.degree_tol = settings.RESTRICTED_DEGREE_TOL
        self.chunk_size = settings.MC_CHUNK_SIZE

    def design_matrix(
        self,
        x: np.ndarray,
        exponents: Sequence[Tuple[int, ...]],
        basis: Basis = "monomial",
        box_lo: Optional[Sequence[float]] = None,
        box_hi: Optional[Sequence[float]] = None,
    ) -> np.ndarray:
        """Rows are points, columns are basis functions in ``exponents`` order"""
        x = np.asarray(x, dtype=float)
        dim = x.shape[1]
        if not exponents:
            return np.zeros((x.shape[0], 0))
        degree = max(max(e) for e in exponents)
        if basis == "monomial":
            tables = [np.vander(x[:, j], degree + 1, increasing=True) for j in range(dim)]
        else:
            center, half = _box_affine(box_lo, box_hi)
            t = (x - center) / half
            tables = [_orthonormal_vander(t[:, j], degree) for j in range(dim)]
        exps = np.asarray(exponents)
        columns = np.ones((x.shape[0], len(exponents)))
        for j in range(dim):
            columns *= tables[j][:, exps[:, j]]
        return columns

    def evaluate(self, p: MultiPoly, x):
        arr = np.asarray(x, dtype=float)
        single = arr.ndim <= 1 and (arr.size == p.dim)
        if arr.ndim == 0 or (arr.ndim == 1 and single):
            arr = arr.reshape(1, p.dim)
        elif arr.ndim == 1 and p.dim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[1] != p.dim:
            raise DimensionMismatchError(p.dim, arr.shape[-1], "point")
        if not p.exponents:
            values = np.zeros(arr.shape[0])
        else:
            A = self.design_matrix(arr, p.exponents, p.basis, p.box_lo, p.box_hi)
            values = A @ np.asarray(p.coefficients)
        return float(values[0]) if single else values

    def as_function(self, p: MultiPoly) -> PointFunction:
        return lambda x: self.evaluate(p, np.asarray(x).reshape(-1, p.dim))

    # ------------------------------------------------------------------
    # Basis conversion
    # ------------------------------------------------------------------

    @staticmethod
    def _axis_change(degree: int, lo: float, hi: float, to_basis: Basis) -> np.ndarray:
        """M[k, l]: coefficient of target basis function l in source basis function k"""
        M = np.zeros((degree + 1, degree + 1))
        scale = np.sqrt(2.0 * np.arange(degree + 1) + 1.0)
        for k in range(degree + 1):
            if to_basis == "legendre":
                coef = Polynomial.basis(k).convert(kind=Legendre, domain=[lo, hi]).coef
                M[k, : coef.size] = coef / scale[: coef.size]
            else:
                coef = Legendre.basis(k, domain=[lo, hi]).convert(kind=Polynomial).coef
                M[k, : coef.size] = coef * scale[k]
        return M

    def to_basis(
        self,
        p: MultiPoly,
        basis: Basis,
        box_lo: Optional[Sequence[float]] = None,
        box_hi: Optional[Sequence[float]] = None,
    ) -> MultiPoly:
        """Re-express ``p`` in ``basis``; the box defaults to the one ``p`` already carries"""
        if basis == p.basis:
            return p
        lo = list(box_lo if box_lo is not None else p.box_lo or [])
        hi = list(box_hi if box_hi is not None else p.box_hi or [])
        if len(lo) != p.dim or len(hi) != p.dim:
            raise InvalidParameterError("basis conversion needs a box matching the dimension")

        axes = [self._axis_change(p.degree, lo[j], hi[j], basis) for j in range(p.dim)]
        target = graded_lex(p.dim, p.degree)
        index = {e: i for i, e in enumerate(target)}
        coeffs = np.zeros(len(target))
        for alpha, c in p.terms.items():
            if c == 0.0:
                continue
            per_axis = [np.flatnonzero(axes[j][alpha[j]]) for j in range(p.dim)]
            for beta in np.array(np.meshgrid(*per_axis, indexing="ij")).reshape(p.dim, -1).T:
                weight = np.prod([axes[j][alpha[j], beta[j]] for j in range(p.dim)])
                coeffs[index[tuple(int(b) for b in beta)]] += c * weight

        legendre = basis == "legendre"
        return MultiPoly(
            dim=p.dim,
            degree=p.degree,
            basis=basis,
            exponents=target,
            coefficients=coeffs.tolist(),
            box_lo=lo if legendre else None,
            box_hi=hi if legendre else None,
            residual=p.residual,
        )

    # ------------------------------------------------------------------
    # Fitting
    # ------------------------------------------------------------------

    def fit_regression(
        self,
        x,
        y,
        degree: int,
        basis: Basis = "legendre",
        ridge: Optional[float] = None,
        box_lo: Optional[Sequence[float]] = None,
        box_hi: Optional[Sequence[float]] = None,
    ) -> MultiPoly:
        """Minimize sum (p(x_i) - y_i)^2 + ridge * |coeffs|^2; the in-sample MSE is kept as residual"""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        y = np.asarray(y, dtype=float).ravel()
        if x.shape[0] != y.shape[0]:
            raise DimensionMismatchError(x.shape[0], y.shape[0], "labels")
        lam = self.default_ridge if ridge is None else float(ridge)
        if lam < 0:
            raise InvalidParameterError(f"ridge must be >= 0, got {lam}")

        dim = x.shape[1]
        exponents = graded_lex(dim, degree)
        if basis == "legendre":
            box_lo = list(box_lo) if box_lo is not None else x.min(axis=0).tolist()
            box_hi = list(box_hi) if box_hi is not None else x.max(axis=0).tolist()
        else:
            box_lo = box_hi = None
        A = self.design_matrix(x, exponents, basis, box_lo, box_hi)
        n_basis = A.shape[1]

        if lam == 0.0:
            rank = int(np.linalg.matrix_rank(A))
            if rank < n_basis:
                raise RankDeficientError(rank, n_basis)
            coeffs = np.linalg.lstsq(A, y, rcond=None)[0]
        else:
            A_aug = np.vstack([A, np.sqrt(lam) * np.eye(n_basis)])
            y_aug = np.concatenate([y, np.zeros(n_basis)])
            coeffs = np.linalg.lstsq(A_aug, y_aug, rcond=None)[0]

        mse = float(np.mean((A @ coeffs - y) ** 2))
        logger.debug("fit_regression", degree=degree, basis=basis, n=x.shape[0], ridge=lam, mse=mse)
        return MultiPoly(
            dim=dim,
            degree=degree,
            basis=basis,
            exponents=exponents,
            coefficients=coeffs.tolist(),
            box_lo=box_lo,
            box_hi=box_hi,
            residual=mse,
        )

    def project_legendre(
        self,
        g: PointFunction,
        degree: int,
        box_lo: Sequence[float],
        box_hi: Sequence[float],
        nodes: Optional[int] = None,
    ) -> MultiPoly:
        """Orthonormal-basis coefficients of ``g`` by tensor Gauss-Legendre quadrature on the box"""
        dim = len(box_lo)
        nodes = nodes or 2 * degree + 8
        t, w = leg.leggauss(nodes)
        center, half = _box_affine(box_lo, box_hi)
        grid_t = np.array(np.meshgrid(*([t] * dim), indexing="ij")).reshape(dim, -1).T
        weights = np.prod(np.array(np.meshgrid(*([w / 2.0] * dim), indexing="ij")).reshape(dim, -1), axis=0)
        values = np.asarray(g(center + half * grid_t), dtype=float).ravel()
        exponents = graded_lex(dim, degree)
        A = self.design_matrix(center + half * grid_t, exponents, "legendre", box_lo, box_hi)
        coeffs = A.T @ (weights * values)
        return MultiPoly(
            dim=dim,
            degree=degree,
            basis="legendre",
            exponents=exponents,
            coefficients=coeffs.tolist(),
            box_lo=list(box_lo),
            box_hi=list(box_hi),
        )

    def random_polynomial(self, dim: int, degree: int, seed: int) -> MultiPoly:
        """i.i.d. N(0,1) monomial coefficients over every multi-index, scaled to unit norm"""
        exponents = graded_lex(dim, degree)
        coeffs = generator(seed).standard_normal(len(exponents))
        coeffs /= np.linalg.norm(coeffs)
        return MultiPoly(dim=dim, degree=degree, exponents=exponents, coefficients=coeffs.tolist())

    # ------------------------------------------------------------------
    # Functionals
    # ------------------------------------------------------------------

    def mc_functional(self, g: PointFunction, d: Density, mc: Optional[McSpec] = None) -> Estimate:
        """Mean and standard error of g under d, chunked over child streams of the seed"""
        mc = mc or McSpec()
        count, mean, m2 = 0, 0.0, 0.0
        for chunk, size in enumerate(chunk_sizes(mc.n_samples, self.chunk_size)):
            x = dist_service.draw(d, size, generator(mc.seed, chunk))
            values = np.asarray(g(x), dtype=float).ravel()
            bad = ~np.isfinite(values)
            if np.any(bad):
                i = int(np.argmax(bad))
                raise NonFiniteValueError(x[i].tolist(), float(values[i]))
            chunk_mean = float(values.mean())
            chunk_m2 = float(((values - chunk_mean) ** 2).sum())
            total = count + size
            delta = chunk_mean - mean
            mean += delta * size / total
            m2 += chunk_m2 + delta**2 * count * size / total
            count = total
        variance = m2 / (count - 1) if count > 1 else 0.0
        return Estimate(value=mean, stderr=float(np.sqrt(variance / count)), n_samples=count)

    def uniform_abs_moment(self, p: MultiPoly, lo: float, hi: float, power: float = 1.0) -> float:
        """E|p(x)|^power for x ~ U([lo, hi]), splitting at real roots; exact for integer powers"""
        if p.dim != 1:
            raise DimensionMismatchError(1, p.dim, "polynomial")
        mono = self.to_basis(p, "monomial")
        coef = np.zeros(mono.degree + 1)
        for (k,), c in mono.terms.items():
            coef[k] = c
        poly = Polynomial(coef)
        roots = [r.real for r in poly.roots() if abs(r.imag) < 1e-12 and lo < r.real < hi]
        cuts = [lo] + sorted(roots) + [hi]
        nodes = max(32, int(np.ceil((mono.degree * power + 1) / 2)) + 1)
        t, w = leg.leggauss(nodes)
        total = 0.0
        for a, b in zip(cuts, cuts[1:]):
            x = (a + b) / 2.0 + (b - a) / 2.0 * t
            total += (b - a) / 2.0 * float(w @ np.abs(poly(x)) ** power)
        return total / (hi - lo)

    def restricted_degree(
        self,
        g: PointFunction,
        x0: Sequence[float],
        direction: Sequence[float],
        max_degree: int,
        tol: Optional[float] = None,
    ) -> LineDegree:
        """Degree of t -> g(x0 + t dir) from a Chebyshev interpolant on D+2 nodes"""
        x0 = np.asarray(x0, dtype=float)
        direction = np.asarray(direction, dtype=float)
        if not np.any(direction):
            raise InvalidParameterError("line direction must be nonzero")
        tol = self.degree_tol if tol is None else tol
        t = cheb.chebpts1(max_degree + 2)
        values = np.asarray(g(x0 + np.outer(t, direction)), dtype=float).ravel()
        coeffs = np.abs(cheb.chebfit(t, values, max_degree + 1))
        scale = coeffs.max()
        if scale == 0.0:
            return LineDegree(degree=0, max_degree=max_degree)
        significant = np.flatnonzero(coeffs > tol * scale)
        top = int(significant[-1])
        return LineDegree(degree=min(top, max_degree), max_degree=max_degree, exceeded=top > max_degree)

    def max_restricted_degree(
        self, g: PointFunction, dim: int, max_degree: int, lines: int = 20, seed: int = 0
    ) -> LineDegree:
        """Maximum restricted degree over ``lines`` random lines with Gaussian anchor and direction"""
        rng = generator(seed)
        worst = LineDegree(degree=0, max_degree=max_degree)
        for _ in range(lines):
            x0, direction = rng.standard_normal(dim), rng.standard_normal(dim)
            found = self.restricted_degree(g, x0, direction, max_degree)
            if found.exceeded or found.degree > worst.degree:
                worst = found
            if worst.exceeded:
                break
        return worst


poly_service = PolynomialService()
