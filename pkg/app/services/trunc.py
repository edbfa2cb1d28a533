from typing import Optional, Tuple

import numpy as np
import structlog
from scipy import special

from app.core.config import settings
from app.core.errors import InvalidParameterError, MassTooSmallError
from app.core.rng import child_seed
from app.models.distributions import Box, Gaussian, Halfspace, IntervalUnion, TruncatedGaussian
from app.models.estimates import Estimate
from app.models.polynomial import McSpec
from app.models.reports import TransferReport, TruncatedTransferReport
from app.models.truncation import LabelSet, Model, TruncatedRegressionInstance
from app.services.dist import dist_service

logger = structlog.get_logger(__name__)

INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def as_intervals(region: LabelSet) -> IntervalUnion:
    """Rewrite a one-dimensional truncation set as an interval union"""
    if isinstance(region, IntervalUnion):
        return region
    if isinstance(region, Box):
        return IntervalUnion(intervals=[(region.lo[0], region.hi[0])])
    if isinstance(region, Halfspace):
        a, c = region.normal[0], region.offset
        return IntervalUnion(intervals=[(c / a, np.inf)] if a > 0 else [(-np.inf, c / a)])
    raise InvalidParameterError(f"{region.kind} is not a label-space set")


def _phi(z: float) -> float:
    return 0.0 if np.isinf(z) else float(INV_SQRT_2PI * np.exp(-0.5 * z * z))


def _z_phi(z: float) -> float:
    return 0.0 if np.isinf(z) else z * _phi(z)


class TruncationService:
    """Mean-squared-error transfer between truncated and non-truncated Gaussian labels"""

    def __init__(self):
        self.mc_floor = settings.MASS_FLOOR_MC
        self.quadrature_floor = settings.MASS_FLOOR_QUADRATURE
        self.default_constant = settings.TRUNCATION_CONSTANT

    def truncated_moments(self, mean: float, region: LabelSet, var: float = 1.0) -> Tuple[float, float, float]:
        """(mass, E[z], E[z^2]) for y = mean + sd * z drawn from N_S(mean, var), in closed form"""
        sd = float(np.sqrt(var))
        mass = first = second = 0.0
        for a, b in as_intervals(region).intervals:
            za, zb = (a - mean) / sd, (b - mean) / sd
            piece = float(special.ndtr(-za) - special.ndtr(-zb)) if za > 0 else float(special.ndtr(zb) - special.ndtr(za))
            mass += piece
            first += _phi(za) - _phi(zb)
            second += piece + _z_phi(za) - _z_phi(zb)
        if mass <= 0.0:
            raise MassTooSmallError(mass, self.quadrature_floor)
        return mass, first / mass, second / mass

    def sample_truncated_normal(
        self, mean: float, var: float, region: LabelSet, n: int, seed: int = 0
    ) -> np.ndarray:
        mass = dist_service.gaussian_mass([mean], [[var]], region).value
        if mass < settings.REJECTION_FLOOR_RATE:
            raise MassTooSmallError(mass, settings.REJECTION_FLOOR_RATE)
        law = TruncatedGaussian(mean=[mean], cov=[[var]], truncation=region)
        return dist_service.sample(law, n, seed)[:, 0]

    def _square_error(
        self, mean: float, estimate: float, region: Optional[LabelSet], mc: Optional[McSpec], index: int
    ) -> Estimate:
        """E[(y - estimate)^2] for y ~ N_S(mean, 1); S = None means no truncation"""
        if region is None:
            if mc is None:
                return Estimate(value=1.0 + (mean - estimate) ** 2)
            y = dist_service.sample(Gaussian.standard(1, [mean]), mc.n_samples, child_seed(mc.seed, index))[:, 0]
        elif mc is None:
            _, first, second = self.truncated_moments(mean, region)
            offset = mean - estimate
            return Estimate(value=second + 2.0 * offset * first + offset**2)
        else:
            y = self.sample_truncated_normal(mean, 1.0, region, mc.n_samples, child_seed(mc.seed, index))
        err = (y - estimate) ** 2
        return Estimate(
            value=float(err.mean()), stderr=float(err.std(ddof=1) / np.sqrt(err.size)), n_samples=err.size
        )

    def _average_error(
        self, f: Model, inst: TruncatedRegressionInstance, region: Optional[LabelSet], mc: Optional[McSpec]
    ) -> Estimate:
        means = inst.means
        estimates = np.asarray(f(inst.covariates), dtype=float).ravel()
        parts = [self._square_error(m, e, region, mc, i) for i, (m, e) in enumerate(zip(means, estimates))]
        value = float(np.mean([p.value for p in parts]))
        stderr = float(np.sqrt(sum(p.stderr**2 for p in parts)) / len(parts))
        return Estimate(value=value, stderr=stderr, n_samples=sum(p.n_samples for p in parts))

    def truncated_mse(self, f: Model, inst: TruncatedRegressionInstance, mc: Optional[McSpec] = None) -> Estimate:
        """(1/N) sum_i E_{y ~ N_S(mu_i, 1)} (y - f(x_i))^2; closed form unless ``mc`` is given"""
        self._require_mass(inst, mc)
        return self._average_error(f, inst, inst.truncation, mc)

    def full_mse(self, f: Model, inst: TruncatedRegressionInstance, mc: Optional[McSpec] = None) -> Estimate:
        return self._average_error(f, inst, None, mc)

    def alpha_mass_min(self, inst: TruncatedRegressionInstance) -> Estimate:
        """min_i N(mu_i, 1; S), flagged when below the usable floor"""
        masses = [dist_service.gaussian_mass([m], [[1.0]], inst.truncation).value for m in inst.means]
        alpha = float(min(masses))
        flags = ["below_usable_threshold"] if alpha < self.mc_floor else []
        return Estimate(value=alpha, flags=flags)

    def _require_mass(self, inst: TruncatedRegressionInstance, mc: Optional[McSpec]) -> float:
        alpha = self.alpha_mass_min(inst).value
        floor = self.quadrature_floor if mc is None else self.mc_floor
        if alpha < floor:
            raise MassTooSmallError(alpha, floor)
        return alpha

    def _both_directions(
        self,
        alpha: float,
        C: float,
        full: Estimate,
        truncated: Estimate,
        kind: str,
        method: str,
    ) -> TruncatedTransferReport:
        forward_coef = C / alpha**2
        reverse_coef = 1.0 / alpha
        forward = TransferReport(
            kind=f"{kind}-forward",
            degree=2,
            constant=C,
            coefficient=forward_coef,
            lhs=full.value,
            lhs_se=full.stderr,
            rhs=forward_coef * truncated.value,
            rhs_se=forward_coef * truncated.stderr,
        )
        reverse = TransferReport(
            kind=f"{kind}-reverse",
            degree=2,
            constant=1.0,
            bridge="change-of-measure",
            coefficient=reverse_coef,
            lhs=truncated.value,
            lhs_se=truncated.stderr,
            rhs=reverse_coef * full.value,
            rhs_se=reverse_coef * full.stderr,
        )
        return TruncatedTransferReport(
            alpha=alpha,
            constant=C,
            full_mse=full.value,
            full_se=full.stderr,
            truncated_mse=truncated.value,
            truncated_se=truncated.stderr,
            forward=forward,
            reverse=reverse,
            method=method,
        )

    def truncated_transfer_check(
        self,
        f: Model,
        inst: TruncatedRegressionInstance,
        C: Optional[float] = None,
        mc: Optional[McSpec] = None,
    ) -> TruncatedTransferReport:
        """full_mse <= (C / alpha^2) truncated_mse and truncated_mse <= full_mse / alpha"""
        C = self.default_constant if C is None else C
        alpha = self.alpha_mass_min(inst).value
        if alpha < self.mc_floor:
            raise MassTooSmallError(alpha, self.mc_floor)
        full = self.full_mse(f, inst, mc)
        truncated = self.truncated_mse(f, inst, mc)
        report = self._both_directions(
            alpha, C, full, truncated, "truncated-regression", "closed_form" if mc is None else "monte_carlo"
        )
        logger.debug(
            "truncated_transfer_check",
            alpha=alpha,
            C=C,
            full=full.value,
            truncated=truncated.value,
            forward=report.forward.satisfied,
            reverse=report.reverse.satisfied,
        )
        return report

    def truncated_gaussian_mse_check(
        self,
        mean,
        cov,
        region,
        estimate,
        C: Optional[float] = None,
        mc: Optional[McSpec] = None,
    ) -> TruncatedTransferReport:
        """MSE of a mean estimate under N_S(mean, cov) against N(mean, cov), both directions"""
        C = self.default_constant if C is None else C
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        estimate = np.atleast_1d(np.asarray(estimate, dtype=float))
        alpha = dist_service.gaussian_mass(mean, cov, region).value
        full = Estimate(value=float(np.trace(cov) + np.sum((mean - estimate) ** 2)))

        if mean.shape[0] == 1 and mc is None:
            _, first, second = self.truncated_moments(float(mean[0]), region, float(cov[0, 0]))
            sd, offset = float(np.sqrt(cov[0, 0])), float(mean[0] - estimate[0])
            truncated = Estimate(value=sd * sd * second + 2.0 * sd * offset * first + offset**2)
            method = "closed_form"
        else:
            if alpha < self.mc_floor:
                raise MassTooSmallError(alpha, self.mc_floor)
            mc = mc or McSpec()
            law = TruncatedGaussian(mean=mean.tolist(), cov=cov.tolist(), truncation=region)
            y = dist_service.sample(law, mc.n_samples, mc.seed)
            err = np.sum((y - estimate) ** 2, axis=1)
            truncated = Estimate(
                value=float(err.mean()), stderr=float(err.std(ddof=1) / np.sqrt(err.size)), n_samples=err.size
            )
            method = "monte_carlo"
        return self._both_directions(alpha, C, full, truncated, "truncated-gaussian", method)

    def naive_mean_bound(
        self, samples, alpha: float, mean_star, cov, C: Optional[float] = None
    ) -> TransferReport:
        """Empirical mean of truncated samples: non-truncated MSE against (C / alpha^3) OPT"""
        C = self.default_constant if C is None else C
        samples = np.asarray(samples, dtype=float)
        if samples.ndim == 1:
            samples = samples.reshape(-1, 1)
        estimate = samples.mean(axis=0)
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        opt = float(np.trace(cov))
        mse = opt + float(np.sum((np.atleast_1d(mean_star) - estimate) ** 2))
        coefficient = C / alpha**3
        return TransferReport(
            kind="truncated-naive-mean",
            degree=2,
            constant=C,
            coefficient=coefficient,
            lhs=mse,
            rhs=coefficient * opt,
        )


trunc_service = TruncationService()
