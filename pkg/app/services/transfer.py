import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import special

from app.core.config import settings
from app.core.errors import InvalidParameterError
from app.core.rng import child_seed
from app.models.distributions import LOG_CONCAVE_KINDS, Density, Gaussian, UniformBox
from app.models.estimates import Estimate
from app.models.polynomial import McSpec, MultiPoly
from app.models.reports import (
    CatalogEntry,
    Coefficient,
    EnsembleResult,
    HolderPair,
    TransferRatio,
    TransferReport,
)
from app.services.dist import dist_service
from app.services.poly import poly_service

logger = structlog.get_logger(__name__)

_CATALOG_KINDS = {
    "gaussian_1d": "gaussian1d",
    "gaussian_nd": "gaussianNd",
    "translated_product": "translated_product",
    "gaussian_general_cov": "gaussian_general_cov",
}


def _uniform_1d(d: Density) -> bool:
    return isinstance(d, UniformBox) and d.dim == 1


class TransferService:
    """Coefficient formulas and empirical checks for polynomial transfer between densities"""

    def __init__(self):
        self.default_constant = settings.CW_CONSTANT

    # ------------------------------------------------------------------
    # Closed-form bounds
    # ------------------------------------------------------------------

    def carbery_wright_bound(
        self, d: int, q: float, gamma: float, moment: float, C: Optional[float] = None
    ) -> float:
        """Small-ball bound C q gamma^(1/d) / moment^(1/q), clipped to [0, 1]"""
        if moment <= 0:
            raise InvalidParameterError(f"moment must be positive, got {moment}")
        if gamma < 0 or q <= 0 or d < 1:
            raise InvalidParameterError("need gamma >= 0, q > 0 and d >= 1")
        if gamma == 0:
            return 0.0
        C = self.default_constant if C is None else C
        log_bound = math.log(C) + math.log(q) + math.log(gamma) / d - math.log(moment) / q
        return min(1.0, math.exp(min(log_bound, 0.0)))

    def thm_main_coefficient(
        self,
        d: int,
        holder: HolderPair,
        D_Q_mu: float,
        D_P_mu: float,
        C: Optional[float] = None,
    ) -> Coefficient:
        """(C d)^d 2^(d beta) D_Q_mu D_P_mu^(beta d), the factor in front of (E_P|f|^beta)^(1/beta)"""
        if math.isinf(holder.beta):
            raise InvalidParameterError("beta = inf has no finite transfer coefficient")
        if D_Q_mu < 1 - 1e-9 or D_P_mu < 1 - 1e-9:
            raise InvalidParameterError("Renyi divergences of probability densities are >= 1")
        C = self.default_constant if C is None else C
        if math.isinf(D_Q_mu) or math.isinf(D_P_mu):
            return Coefficient(value=math.inf, log_value=math.inf, flags=["infinite_divergence"])
        beta = holder.beta
        log_value = (
            d * math.log(C * d)
            + d * beta * math.log(2.0)
            + math.log(D_Q_mu)
            + beta * d * math.log(D_P_mu)
        )
        return Coefficient.from_log(log_value)

    def cor_logconcave_coefficient(self, d: int, ratio_PQ: float, C: Optional[float] = None) -> Coefficient:
        """(2 C d)^d |dP/dQ|_inf^d for a log-concave target Q"""
        return self.thm_main_coefficient(d, HolderPair(), 1.0, ratio_PQ, C)

    def optimal_gamma(
        self, d: int, beta: float, moment: float, D_P_mu: float, C: Optional[float] = None
    ) -> float:
        """Threshold at which the small-ball estimate in the transfer argument equals 1/2"""
        if moment < 0:
            raise InvalidParameterError(f"moment must be >= 0, got {moment}")
        if moment == 0:
            return 0.0
        C = self.default_constant if C is None else C
        log_denominator = beta * d * (
            math.log(C * beta * d) + beta * math.log(2.0) + beta * math.log(D_P_mu)
        )
        return math.exp(math.log(moment) - log_denominator)

    def small_ball_probability(self, p: MultiPoly, gamma: float, d: Density) -> float:
        """Exact P(|p(x)| <= gamma) for a 1-D polynomial under a 1-D Gaussian or uniform law"""
        if p.dim != 1 or d.dim != 1:
            raise InvalidParameterError("small-ball probabilities are computed in one dimension")
        mono = poly_service.to_basis(p, "monomial")
        coef = np.zeros(mono.degree + 1)
        for (k,), c in mono.terms.items():
            coef[k] = c
        cuts = set()
        for shift in (-gamma, gamma):
            shifted = coef.copy()
            shifted[0] -= shift
            if np.any(shifted[1:]):
                roots = np.polynomial.polynomial.polyroots(shifted)
                cuts.update(r.real for r in roots if abs(r.imag) < 1e-10)
        points = [-math.inf] + sorted(cuts) + [math.inf]
        total = 0.0
        for a, b in zip(points, points[1:]):
            if math.isinf(a) and math.isinf(b):
                mid = 0.0
            elif math.isinf(a):
                mid = b - 1.0
            elif math.isinf(b):
                mid = a + 1.0
            else:
                mid = (a + b) / 2.0
            if abs(np.polynomial.polynomial.polyval(mid, coef)) <= gamma:
                total += self._interval_probability(d, a, b)
        return min(1.0, total)

    @staticmethod
    def _interval_probability(d: Density, a: float, b: float) -> float:
        if isinstance(d, Gaussian):
            mean, sd = d.mean[0], math.sqrt(d.cov[0][0])
            return float(special.ndtr((b - mean) / sd) - special.ndtr((a - mean) / sd))
        if isinstance(d, UniformBox):
            lo, hi = d.lo[0], d.hi[0]
            return max(0.0, min(b, hi) - max(a, lo)) / (hi - lo)
        raise InvalidParameterError(f"no closed-form interval probability for {d.kind}")

    # ------------------------------------------------------------------
    # Empirical sides
    # ------------------------------------------------------------------

    def _abs_moment(self, f: MultiPoly, d: Density, power: float, mc: McSpec) -> Estimate:
        if _uniform_1d(d) and f.dim == 1:
            return Estimate(value=poly_service.uniform_abs_moment(f, d.lo[0], d.hi[0], power))
        return poly_service.mc_functional(
            lambda x: np.abs(poly_service.evaluate(f, x)) ** power, d, mc
        )

    def empirical_transfer_ratio(
        self, f: MultiPoly, P: Density, Q: Density, power: float = 1, mc: Optional[McSpec] = None
    ) -> TransferRatio:
        """E_Q|f|^power / E_P|f|^power (quadrature for 1-D uniform laws, Monte Carlo otherwise)"""
        if f.is_zero():
            raise InvalidParameterError("transfer ratio of the zero polynomial is undefined")
        mc = mc or McSpec()
        lhs = self._abs_moment(f, Q, power, McSpec(n_samples=mc.n_samples, seed=child_seed(mc.seed, 1)))
        rhs = self._abs_moment(f, P, power, mc)
        if rhs.value <= 3.0 * rhs.stderr or rhs.value == 0.0:
            logger.warning("transfer_ratio_degenerate", denominator=rhs.value, stderr=rhs.stderr)
            return TransferRatio(
                ratio=None, lhs=lhs.value, lhs_se=lhs.stderr, rhs=rhs.value, rhs_se=rhs.stderr,
                flags=["degenerate"],
            )
        return TransferRatio(
            ratio=lhs.value / rhs.value, lhs=lhs.value, lhs_se=lhs.stderr, rhs=rhs.value, rhs_se=rhs.stderr,
        )

    def transfer_ensemble(
        self,
        P_box: Tuple[float, float],
        Q_box: Tuple[float, float],
        degree: int,
        count: int = 1000,
        seed: int = 0,
    ) -> EnsembleResult:
        """max over random degree-d polynomials of (E_Q|f| / E_P|f|)^(1/d), by exact quadrature"""
        values: List[float] = []
        for i in range(count):
            f = poly_service.random_polynomial(1, degree, child_seed(seed, i))
            num = poly_service.uniform_abs_moment(f, Q_box[0], Q_box[1])
            den = poly_service.uniform_abs_moment(f, P_box[0], P_box[1])
            values.append((num / den) ** (1.0 / degree))
        worst = int(np.argmax(values))
        logger.info("transfer_ensemble", degree=degree, count=count, max_value=values[worst])
        return EnsembleResult(
            degree=degree, count=count, seed=seed, max_value=values[worst], worst_index=worst, values=values
        )

    # ------------------------------------------------------------------
    # Bridge catalog
    # ------------------------------------------------------------------

    def catalog_coefficient(self, kind: str, d: int, **params) -> CatalogEntry:
        """Bridge nu for the pair and |dQ/dnu|_inf |dP/dnu|_inf^d = Z^(d+1)"""
        if kind not in _CATALOG_KINDS:
            raise InvalidParameterError(
                f"unsupported pair kind '{kind}'; expected one of {sorted(_CATALOG_KINDS)}"
            )
        bridge = dist_service.bridge_construct(_CATALOG_KINDS[kind], **params)
        coefficient = math.exp((d + 1) * math.log(bridge.normalizer))
        return CatalogEntry(kind=kind, degree=d, bridge=bridge, coefficient=coefficient)

    def family_coefficient(
        self, source_mean: Sequence[float], target_means: Sequence[Sequence[float]], d: int
    ) -> float:
        """Worst catalog coefficient from N(source, I) to each N(target, I) in a family"""
        source = np.asarray(source_mean, dtype=float)
        worst = 1.0
        for target in target_means:
            shift = np.asarray(target, dtype=float) - source
            entry = self.catalog_coefficient("gaussian_nd", d, mu=shift.tolist())
            worst = max(worst, entry.coefficient)
        return worst

    # ------------------------------------------------------------------
    # Reports
    # ------------------------------------------------------------------

    def _divergence(self, P: Density, mu: Density, alpha: float, mc: McSpec) -> Estimate:
        if P == mu:
            return Estimate(value=1.0)
        return dist_service.renyi_divergence(P, mu, alpha, mc.n_samples, mc.seed)

    def verify_transfer(
        self,
        f: MultiPoly,
        P: Density,
        Q: Density,
        bridge: Optional[Density],
        d: int,
        holder: Optional[HolderPair] = None,
        C: Optional[float] = None,
        mc: Optional[McSpec] = None,
        kind: str = "euclidean",
    ) -> TransferReport:
        holder = holder or HolderPair()
        C = self.default_constant if C is None else C
        mc = mc or McSpec()
        if bridge is None and Q.kind not in LOG_CONCAVE_KINDS:
            raise InvalidParameterError(
                f"target kind '{Q.kind}' is not log-concave by catalog; supply a bridge"
            )
        mu = Q if bridge is None else bridge

        flags: List[str] = []
        D_Q = self._divergence(Q, mu, holder.alpha, mc)
        D_P = self._divergence(P, mu, holder.alpha, mc)
        flags += D_Q.flags + D_P.flags
        if bridge is None and math.isinf(holder.alpha):
            coefficient = self.cor_logconcave_coefficient(d, max(1.0, D_P.value), C)
        else:
            coefficient = self.thm_main_coefficient(d, holder, max(1.0, D_Q.value), max(1.0, D_P.value), C)
        flags += coefficient.flags

        lhs = self._abs_moment(f, Q, 1.0, McSpec(n_samples=mc.n_samples, seed=child_seed(mc.seed, 1)))
        rhs_moment = self._abs_moment(f, P, holder.beta, mc)
        if rhs_moment.value <= 3.0 * rhs_moment.stderr or rhs_moment.value == 0.0:
            flags.append("degenerate")
        root = rhs_moment.value ** (1.0 / holder.beta)
        root_se = (
            root / (holder.beta * rhs_moment.value) * rhs_moment.stderr if rhs_moment.value > 0 else 0.0
        )
        rhs = coefficient.value * root
        rhs_se = coefficient.value * root_se if math.isfinite(coefficient.value) else 0.0

        report = TransferReport(
            kind=kind,
            degree=d,
            holder=holder,
            constant=C,
            bridge="target-is-log-concave" if bridge is None else bridge.label,
            coefficient=coefficient.value,
            lhs=lhs.value,
            lhs_se=lhs.stderr,
            rhs=rhs,
            rhs_se=rhs_se,
            flags=sorted(set(flags)),
        )
        logger.info(
            "verify_transfer",
            kind=kind,
            d=d,
            C=C,
            coefficient=report.coefficient,
            lhs=report.lhs,
            rhs=report.rhs,
            satisfied=report.satisfied,
        )
        return report


transfer_service = TransferService()
