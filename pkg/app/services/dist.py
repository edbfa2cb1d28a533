from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import linalg, special, stats

from app.core.config import settings
from app.core.errors import (
    DimensionMismatchError,
    InvalidParameterError,
    RejectionBudgetExceededError,
)
from app.core.rng import generator
from app.models.distributions import (
    Box,
    Bridge1D,
    BridgeGaussianCov,
    BridgeND,
    BridgeProduct,
    Density,
    FrozenCoordinate,
    Gaussian,
    Halfspace,
    IntervalUnion,
    PointMass,
    Product,
    TruncatedGaussian,
    UniformBox,
)
from app.models.estimates import BridgeConstruction, Estimate, MassEstimate, RatioSup

logger = structlog.get_logger(__name__)

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _as_points(d_dim: int, x) -> Tuple[np.ndarray, bool]:
    """Reshape ``x`` to (m, dim); the flag tells whether a single point was passed"""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        if d_dim != 1:
            raise DimensionMismatchError(d_dim, 1, "point")
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if arr.shape[0] == d_dim:
            return arr.reshape(1, d_dim), True
        if d_dim == 1:
            return arr.reshape(-1, 1), False
        raise DimensionMismatchError(d_dim, arr.shape[0], "point")
    if arr.ndim == 2 and arr.shape[1] == d_dim:
        return arr, False
    raise DimensionMismatchError(d_dim, arr.shape[-1], "points")


def householder_to_e1(direction: np.ndarray) -> np.ndarray:
    """Symmetric orthogonal H with H u = e1 for the unit vector u along ``direction``"""
    n = direction.shape[0]
    u = direction / np.linalg.norm(direction)
    v = u.copy()
    v[0] -= 1.0
    vv = float(v @ v)
    if vv < 1e-30:
        return np.eye(n)
    return np.eye(n) - 2.0 * np.outer(v, v) / vv


def _sym_sqrt(cov: np.ndarray, inverse: bool = False) -> np.ndarray:
    w, V = np.linalg.eigh(cov)
    w = 1.0 / np.sqrt(w) if inverse else np.sqrt(w)
    return (V * w) @ V.T


class _Factor:
    """A 1-D log-concave factor with mode at 0 (standard normal scaled by sigma, or a uniform)"""

    def __init__(self, density: Optional[Density] = None):
        if density is None or isinstance(density, Gaussian):
            self.kind = "gaussian"
            self.sigma = 1.0 if density is None else float(np.sqrt(density.cov[0][0]))
            self.lo, self.hi = -np.inf, np.inf
            self.left_mass = 0.5
            self.log_mode = -np.log(self.sigma) - LOG_SQRT_2PI
        else:
            self.kind = "uniform"
            self.lo, self.hi = float(density.lo[0]), float(density.hi[0])
            self.sigma = (self.hi - self.lo) / np.sqrt(12.0)
            self.left_mass = -self.lo / (self.hi - self.lo)
            self.log_mode = -np.log(self.hi - self.lo)

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "gaussian":
            return -0.5 * (x / self.sigma) ** 2 + self.log_mode
        inside = (x >= self.lo) & (x <= self.hi)
        return np.where(inside, self.log_mode, -np.inf)

    def draw_half(self, n: int, rng: np.random.Generator, left: bool) -> np.ndarray:
        if self.kind == "gaussian":
            g = self.sigma * np.abs(rng.standard_normal(n))
            return -g if left else g
        return rng.uniform(self.lo, 0.0, n) if left else rng.uniform(0.0, self.hi, n)

    def box(self, sigmas: float) -> Tuple[float, float]:
        if self.kind == "gaussian":
            return -sigmas * self.sigma, sigmas * self.sigma
        return self.lo, self.hi


class _Glued:
    """1-D glue of a mode-0 factor and its translate by ``shift``, flat between the modes"""

    def __init__(self, factor: _Factor, shift: float):
        self.factor = factor
        self.shift = float(shift)
        self.lo_end, self.hi_end = min(0.0, self.shift), max(0.0, self.shift)
        self.left_shift = min(self.shift, 0.0)
        self.right_shift = max(self.shift, 0.0)
        self.slab_mass = abs(self.shift) * np.exp(factor.log_mode)
        self.normalizer = 1.0 + self.slab_mass

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        f = self.factor
        left = f.logpdf(x - self.left_shift)
        right = f.logpdf(x - self.right_shift)
        val = np.where(x <= self.lo_end, left, np.where(x >= self.hi_end, right, f.log_mode))
        return val - np.log(self.normalizer)

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        f = self.factor
        u = rng.random(n)
        left_draw = self.left_shift + f.draw_half(n, rng, left=True)
        right_draw = self.right_shift + f.draw_half(n, rng, left=False)
        slab_draw = self.lo_end + abs(self.shift) * rng.random(n)
        left_cut = f.left_mass / self.normalizer
        slab_cut = (f.left_mass + self.slab_mass) / self.normalizer
        return np.where(u < left_cut, left_draw, np.where(u < slab_cut, slab_draw, right_draw))


class DistributionService:
    """Density catalog: evaluation, sampling, ratio sups, divergences and bridges"""

    def __init__(self):
        self.box_sigmas = settings.RATIO_BOX_SIGMAS
        self.grid_points = settings.RATIO_GRID_POINTS
        self.grid_budget = settings.RATIO_GRID_BUDGET
        self.fallback_rate = settings.REJECTION_FALLBACK_RATE
        self.floor_rate = settings.REJECTION_FLOOR_RATE
        self.chunk_size = settings.MC_CHUNK_SIZE

    # ------------------------------------------------------------------
    # Evaluation
    # ------------------------------------------------------------------

    def logpdf(self, d: Density, x):
        points, single = _as_points(d.dim, x)
        values = self._logpdf(d, points)
        return float(values[0]) if single else values

    def pdf(self, d: Density, x):
        values = self.logpdf(d, x)
        return float(np.exp(values)) if np.ndim(values) == 0 else np.exp(values)

    def _logpdf(self, d: Density, x: np.ndarray) -> np.ndarray:
        if isinstance(d, Gaussian):
            return self._gaussian_logpdf(x, np.asarray(d.mean), np.asarray(d.cov))
        if isinstance(d, UniformBox):
            inside = np.all((x >= np.asarray(d.lo)) & (x <= np.asarray(d.hi)), axis=1)
            return np.where(inside, -np.log(d.volume), -np.inf)
        if isinstance(d, TruncatedGaussian):
            if isinstance(d.truncation, FrozenCoordinate):
                raise InvalidParameterError("frozen-coordinate sets apply to the hypercube only")
            mass = self.gaussian_mass(d.mean, d.cov, d.truncation).value
            base = self._gaussian_logpdf(x, np.asarray(d.mean), np.asarray(d.cov))
            return np.where(d.truncation.contains(x), base - np.log(mass), -np.inf)
        if isinstance(d, Bridge1D):
            return _Glued(_Factor(), d.mu).logpdf(x[:, 0])
        if isinstance(d, BridgeND):
            return self._rotated_bridge_logpdf(x, np.asarray(d.mu, dtype=float))
        if isinstance(d, BridgeProduct):
            glued = _Glued(_Factor(d.factors[0]), d.shift)
            total = glued.logpdf(x[:, 0])
            for i, factor in enumerate(d.factors[1:], start=1):
                total = total + _Factor(factor).logpdf(x[:, i])
            return total
        if isinstance(d, BridgeGaussianCov):
            cov = np.asarray(d.cov)
            whiten = _sym_sqrt(cov, inverse=True)
            mu_z = whiten[:, 0] * d.gamma
            log_jac = -0.5 * np.linalg.slogdet(cov)[1]
            return self._rotated_bridge_logpdf(x @ whiten, mu_z) + log_jac
        if isinstance(d, Product):
            total = np.zeros(x.shape[0])
            for i, factor in enumerate(d.factors):
                total = total + self._logpdf(factor, x[:, i : i + 1])
            return total
        if isinstance(d, PointMass):
            raise InvalidParameterError("a point mass has no density; it can only be sampled")
        raise InvalidParameterError(f"unsupported density kind {d.kind}")

    @staticmethod
    def _gaussian_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
        chol = np.linalg.cholesky(cov)
        z = linalg.solve_triangular(chol, (x - mean).T, lower=True)
        dim = mean.shape[0]
        return -0.5 * np.sum(z**2, axis=0) - np.log(np.diag(chol)).sum() - dim * LOG_SQRT_2PI

    @staticmethod
    def _rotated_bridge_logpdf(x: np.ndarray, mu: np.ndarray) -> np.ndarray:
        norm = float(np.linalg.norm(mu))
        if norm == 0.0:
            return -0.5 * np.sum(x**2, axis=1) - x.shape[1] * LOG_SQRT_2PI
        y = x @ householder_to_e1(mu)
        head = _Glued(_Factor(), norm).logpdf(y[:, 0])
        tail = -0.5 * np.sum(y[:, 1:] ** 2, axis=1) - (x.shape[1] - 1) * LOG_SQRT_2PI
        return head + tail

    # ------------------------------------------------------------------
    # Sampling
    # ------------------------------------------------------------------

    def sample(self, d: Density, n: int, seed: int) -> np.ndarray:
        """``n`` i.i.d. draws as an (n, dim) array; identical for identical seeds"""
        if n < 1:
            raise InvalidParameterError(f"sample count must be >= 1, got {n}")
        return self.draw(d, n, generator(seed))

    def draw(self, d: Density, n: int, rng: np.random.Generator) -> np.ndarray:
        if isinstance(d, Gaussian):
            mean, cov = np.asarray(d.mean), np.asarray(d.cov)
            return mean + rng.standard_normal((n, d.dim)) @ np.linalg.cholesky(cov).T
        if isinstance(d, UniformBox):
            return rng.uniform(np.asarray(d.lo), np.asarray(d.hi), size=(n, d.dim))
        if isinstance(d, TruncatedGaussian):
            return self._draw_truncated(d, n, rng)
        if isinstance(d, Bridge1D):
            return _Glued(_Factor(), d.mu).draw(n, rng).reshape(-1, 1)
        if isinstance(d, BridgeND):
            return self._draw_rotated_bridge(np.asarray(d.mu, dtype=float), n, rng)
        if isinstance(d, BridgeProduct):
            cols = [_Glued(_Factor(d.factors[0]), d.shift).draw(n, rng)]
            cols += [self.draw(f, n, rng)[:, 0] for f in d.factors[1:]]
            return np.column_stack(cols)
        if isinstance(d, BridgeGaussianCov):
            cov = np.asarray(d.cov)
            mu_z = _sym_sqrt(cov, inverse=True)[:, 0] * d.gamma
            return self._draw_rotated_bridge(mu_z, n, rng) @ _sym_sqrt(cov)
        if isinstance(d, Product):
            return np.column_stack([self.draw(f, n, rng)[:, 0] for f in d.factors])
        if isinstance(d, PointMass):
            return np.tile(np.asarray(d.value, dtype=float), (n, 1))
        raise InvalidParameterError(f"unsupported density kind {d.kind}")

    @staticmethod
    def _draw_rotated_bridge(mu: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        norm = float(np.linalg.norm(mu))
        y = rng.standard_normal((n, mu.shape[0]))
        if norm == 0.0:
            return y
        y[:, 0] = _Glued(_Factor(), norm).draw(n, rng)
        return y @ householder_to_e1(mu)

    def _draw_truncated(self, d: TruncatedGaussian, n: int, rng: np.random.Generator) -> np.ndarray:
        mean, cov, region = np.asarray(d.mean), np.asarray(d.cov), d.truncation
        if isinstance(region, FrozenCoordinate):
            raise InvalidParameterError("frozen-coordinate sets apply to the hypercube only")
        acceptance = self.gaussian_mass(mean, cov, region).value
        if acceptance < self.floor_rate:
            raise RejectionBudgetExceededError(acceptance, self.floor_rate)
        if acceptance < self.fallback_rate:
            sampler = self._inverse_cdf_sampler(mean, cov, region)
            if sampler is not None:
                logger.warning("truncated_sampling_inverse_cdf", acceptance=acceptance, n=n)
                return sampler(n, rng)
            logger.warning("truncated_sampling_slow_rejection", acceptance=acceptance, n=n)

        chol = np.linalg.cholesky(cov)
        kept, have = [], 0
        while have < n:
            batch = min(int(1.2 * (n - have) / acceptance) + 16, 16 * self.chunk_size)
            draws = mean + rng.standard_normal((batch, d.dim)) @ chol.T
            draws = draws[region.contains(draws)]
            kept.append(draws)
            have += draws.shape[0]
        return np.concatenate(kept)[:n]

    def _inverse_cdf_sampler(
        self, mean: np.ndarray, cov: np.ndarray, region
    ) -> Optional[Callable[[int, np.random.Generator], np.ndarray]]:
        if isinstance(region, IntervalUnion):
            return lambda n, rng: self._truncnorm_union(
                float(mean[0]), float(np.sqrt(cov[0, 0])), region.intervals, n, rng
            ).reshape(-1, 1)
        if isinstance(region, Halfspace):
            a = np.asarray(region.normal, dtype=float)
            cov_a = cov @ a
            var_s = float(a @ cov_a)
            mean_s = float(a @ mean)

            def halfspace(n: int, rng: np.random.Generator) -> np.ndarray:
                s = self._truncnorm_union(
                    mean_s, np.sqrt(var_s), [(region.offset, np.inf)], n, rng
                )
                z = rng.standard_normal((n, mean.shape[0])) @ np.linalg.cholesky(cov).T
                residual = z - np.outer(z @ a, cov_a) / var_s
                return mean + np.outer(s - mean_s, cov_a) / var_s + residual

            return halfspace
        if isinstance(region, Box) and np.allclose(cov, np.diag(np.diag(cov))):
            sd = np.sqrt(np.diag(cov))
            return lambda n, rng: np.column_stack(
                [
                    self._truncnorm_union(mean[i], sd[i], [(region.lo[i], region.hi[i])], n, rng)
                    for i in range(mean.shape[0])
                ]
            )
        return None

    @staticmethod
    def _truncnorm_union(
        mean: float, sd: float, intervals: Sequence[Tuple[float, float]], n: int,
        rng: np.random.Generator,
    ) -> np.ndarray:
        bounds = [((a - mean) / sd, (b - mean) / sd) for a, b in intervals]
        masses = np.array([_std_interval_mass(a, b) for a, b in bounds])
        which = rng.choice(len(bounds), size=n, p=masses / masses.sum())
        out = np.empty(n)
        for j, (a, b) in enumerate(bounds):
            idx = np.flatnonzero(which == j)
            if idx.size:
                out[idx] = stats.truncnorm.rvs(
                    a, b, loc=mean, scale=sd, size=idx.size, random_state=rng
                )
        return out

    # ------------------------------------------------------------------
    # Ratios and divergences
    # ------------------------------------------------------------------

    def bounding_box(self, d: Density, sigmas: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Search region for ratio sups: mean +- ``sigmas`` standard deviations per coordinate"""
        s = self.box_sigmas if sigmas is None else sigmas
        if isinstance(d, Gaussian):
            mean, sd = np.asarray(d.mean), np.sqrt(np.diag(np.asarray(d.cov)))
            return mean - s * sd, mean + s * sd
        if isinstance(d, UniformBox):
            return np.asarray(d.lo, dtype=float), np.asarray(d.hi, dtype=float)
        if isinstance(d, TruncatedGaussian):
            mean, sd = np.asarray(d.mean), np.sqrt(np.diag(np.asarray(d.cov)))
            lo, hi = mean - s * sd, mean + s * sd
            region = d.truncation
            if isinstance(region, IntervalUnion):
                set_lo, set_hi = np.array([region.intervals[0][0]]), np.array([region.intervals[-1][1]])
            elif isinstance(region, Box):
                set_lo, set_hi = np.asarray(region.lo, dtype=float), np.asarray(region.hi, dtype=float)
            else:
                return lo, hi
            lo, hi = np.maximum(lo, set_lo), np.minimum(hi, set_hi)
            empty = lo >= hi
            hi = np.where(empty, lo + s * sd, hi)
            return lo, hi
        if isinstance(d, Bridge1D):
            return np.array([min(0.0, d.mu) - s]), np.array([max(0.0, d.mu) + s])
        if isinstance(d, BridgeND):
            mu = np.asarray(d.mu, dtype=float)
            return np.minimum(0.0, mu) - s, np.maximum(0.0, mu) + s
        if isinstance(d, BridgeProduct):
            boxes = np.array([_Factor(f).box(s) for f in d.factors])
            lo, hi = boxes[:, 0].copy(), boxes[:, 1].copy()
            lo[0] += min(0.0, d.shift)
            hi[0] += max(0.0, d.shift)
            return lo, hi
        if isinstance(d, BridgeGaussianCov):
            sd = np.sqrt(np.diag(np.asarray(d.cov)))
            shift = np.zeros(d.dim)
            shift[0] = d.gamma
            return np.minimum(0.0, shift) - s * sd, np.maximum(0.0, shift) + s * sd
        if isinstance(d, Product):
            boxes = [self.bounding_box(f, s) for f in d.factors]
            return np.concatenate([b[0] for b in boxes]), np.concatenate([b[1] for b in boxes])
        if isinstance(d, PointMass):
            value = np.asarray(d.value, dtype=float)
            return value, value
        raise InvalidParameterError(f"unsupported density kind {d.kind}")

    def density_ratio_sup(
        self,
        P: Density,
        Q: Density,
        box: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
        points: Optional[int] = None,
    ) -> RatioSup:
        """sup_x P(x)/Q(x) over a grid with one refinement pass around the argmax"""
        if P.dim != Q.dim:
            raise DimensionMismatchError(P.dim, Q.dim, "target density")

        if isinstance(P, UniformBox) and isinstance(Q, UniformBox):
            p_lo, p_hi = np.asarray(P.lo), np.asarray(P.hi)
            q_lo, q_hi = np.asarray(Q.lo), np.asarray(Q.hi)
            covered = bool(np.all(p_lo >= q_lo) and np.all(p_hi <= q_hi))
            value = Q.volume / P.volume if covered else np.inf
            return RatioSup(
                value=value, box_lo=list(p_lo), box_hi=list(p_hi), method="closed_form",
                flags=[] if covered else ["infinite_ratio"],
            )

        if box is None:
            p_box, q_box = self.bounding_box(P), self.bounding_box(Q)
            lo, hi = np.minimum(p_box[0], q_box[0]), np.maximum(p_box[1], q_box[1])
        else:
            lo, hi = np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float)
        if lo.shape[0] != P.dim or np.any(~(lo < hi)):
            raise InvalidParameterError("ratio search box is empty")

        per_axis = points or self.grid_points
        per_axis = max(2, min(per_axis, int(self.grid_budget ** (1.0 / P.dim))))

        grid = self._grid(lo, hi, per_axis)
        value, argmax, flags = self._grid_log_ratio(P, Q, grid)
        if value is None:
            raise InvalidParameterError("ratio search grid contains no support point of P")

        if np.isfinite(value):
            step = (hi - lo) / (per_axis - 1)
            fine_lo, fine_hi = np.maximum(lo, argmax - step), np.minimum(hi, argmax + step)
            fine_axis = max(2, min(21, int(self.grid_budget ** (1.0 / P.dim))))
            fine_value, fine_argmax, fine_flags = self._grid_log_ratio(
                P, Q, self._grid(fine_lo, fine_hi, fine_axis)
            )
            flags += fine_flags
            if fine_value is not None and fine_value > value:
                value, argmax = fine_value, fine_argmax

        ratio = float(np.exp(value))
        logger.debug("density_ratio_sup", p=P.kind, q=Q.kind, value=ratio, points=per_axis)
        return RatioSup(
            value=ratio,
            argmax=None if argmax is None else [float(v) for v in argmax],
            box_lo=[float(v) for v in lo],
            box_hi=[float(v) for v in hi],
            flags=sorted(set(flags)),
        )

    @staticmethod
    def _grid(lo: np.ndarray, hi: np.ndarray, per_axis: int) -> np.ndarray:
        axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def _grid_log_ratio(self, P: Density, Q: Density, grid: np.ndarray):
        lp, lq = self._logpdf(P, grid), self._logpdf(Q, grid)
        support = np.isfinite(lp)
        if not np.any(support):
            return None, None, []
        uncovered = support & ~np.isfinite(lq)
        if np.any(uncovered):
            return np.inf, grid[np.argmax(uncovered)], ["infinite_ratio"]
        log_ratio = np.where(support, lp - lq, -np.inf)
        best = int(np.argmax(log_ratio))
        return float(log_ratio[best]), grid[best], []

    def renyi_divergence(
        self, P: Density, Q: Density, alpha: float, n_samples: int = 100_000, seed: int = 0
    ) -> Estimate:
        """(E_{x~Q}[(P(x)/Q(x))^alpha])^(1/alpha); alpha = inf is the ratio sup"""
        if not alpha >= 1:
            raise InvalidParameterError(f"Renyi order must be >= 1, got {alpha}")
        if P.dim != Q.dim:
            raise DimensionMismatchError(P.dim, Q.dim, "target density")
        if np.isinf(alpha):
            sup = self.density_ratio_sup(P, Q)
            return Estimate(value=sup.value, flags=sup.flags)

        x = self.sample(Q, n_samples, seed)
        lp, lq = self._logpdf(P, x), self._logpdf(Q, x)
        log_ratio = np.where(np.isfinite(lp), lp - lq, -np.inf)
        if np.any(np.isposinf(log_ratio)):
            logger.warning("renyi_infinite_ratio", p=P.kind, q=Q.kind, alpha=alpha)
            return Estimate(value=np.inf, n_samples=n_samples, flags=["infinite_ratio"])

        scaled = alpha * log_ratio
        top = float(np.max(scaled))
        if not np.isfinite(top):
            return Estimate(value=0.0, n_samples=n_samples, flags=["disjoint_support"])
        w = np.exp(scaled - top)
        mean_w = float(w.mean())
        value = float(np.exp((top + np.log(mean_w)) / alpha))
        rel = float(w.std(ddof=1)) / (np.sqrt(n_samples) * mean_w) if n_samples > 1 else 0.0
        return Estimate(value=value, stderr=value * rel / alpha, n_samples=n_samples)

    # ------------------------------------------------------------------
    # Gaussian mass of truncation sets
    # ------------------------------------------------------------------

    def gaussian_mass(
        self, mean, cov, region, n_samples: int = 200_000, seed: int = 0
    ) -> MassEstimate:
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        dim = mean.shape[0]
        if cov.shape != (dim, dim):
            raise DimensionMismatchError(dim, cov.shape[0], "covariance")
        if isinstance(region, FrozenCoordinate):
            raise InvalidParameterError("frozen-coordinate sets apply to the hypercube only")
        if region.dim != dim:
            raise DimensionMismatchError(dim, region.dim, "truncation set")

        if isinstance(region, IntervalUnion):
            sd = float(np.sqrt(cov[0, 0]))
            mass = sum(
                _std_interval_mass((a - mean[0]) / sd, (b - mean[0]) / sd)
                for a, b in region.intervals
            )
            return MassEstimate(value=min(1.0, mass))
        if isinstance(region, Halfspace):
            a = np.asarray(region.normal, dtype=float)
            z = (a @ mean - region.offset) / np.sqrt(a @ cov @ a)
            return MassEstimate(value=float(special.ndtr(z)))
        if isinstance(region, Box) and np.allclose(cov, np.diag(np.diag(cov))):
            sd = np.sqrt(np.diag(cov))
            mass = np.prod(
                [
                    _std_interval_mass((region.lo[i] - mean[i]) / sd[i], (region.hi[i] - mean[i]) / sd[i])
                    for i in range(dim)
                ]
            )
            return MassEstimate(value=float(mass))

        inside = self.sample(Gaussian(mean=list(mean), cov=cov.tolist()), n_samples, seed)
        hits = region.contains(inside).astype(float)
        value = float(hits.mean())
        return MassEstimate(
            value=value,
            stderr=float(hits.std(ddof=1) / np.sqrt(n_samples)),
            n_samples=n_samples,
            method="monte_carlo",
        )

    # ------------------------------------------------------------------
    # Bridges
    # ------------------------------------------------------------------

    def bridge_construct(self, kind: str, **params) -> BridgeConstruction:
        """Log-concave bridge between a base density and its translate"""
        if kind == "gaussian1d":
            mu = float(params["mu"])
            if mu == 0.0:
                return BridgeConstruction(density=Gaussian.standard(1))
            return BridgeConstruction(density=Bridge1D(mu=mu), normalizer=1.0 + abs(mu) * INV_SQRT_2PI)
        if kind == "gaussianNd":
            mu = [float(v) for v in params["mu"]]
            norm = float(np.linalg.norm(mu))
            if norm == 0.0:
                return BridgeConstruction(density=Gaussian.standard(len(mu)))
            return BridgeConstruction(density=BridgeND(mu=mu), normalizer=1.0 + norm * INV_SQRT_2PI)
        if kind == "translated_product":
            factors, gamma = params["factors"], float(params["gamma"])
            if gamma == 0.0:
                return BridgeConstruction(density=Product(factors=factors))
            bridge = BridgeProduct(factors=factors, shift=gamma)
            return BridgeConstruction(density=bridge, normalizer=_Glued(_Factor(factors[0]), gamma).normalizer)
        if kind == "gaussian_general_cov":
            cov = np.asarray(params["cov"], dtype=float)
            gamma = float(params["gamma"])
            if gamma == 0.0:
                return BridgeConstruction(density=Gaussian(mean=[0.0] * cov.shape[0], cov=cov.tolist()))
            precision_11 = float(np.linalg.inv(cov)[0, 0])
            return BridgeConstruction(
                density=BridgeGaussianCov(cov=cov.tolist(), gamma=gamma),
                normalizer=1.0 + abs(gamma) * np.sqrt(precision_11) * INV_SQRT_2PI,
            )
        raise InvalidParameterError(f"unsupported bridge kind '{kind}'")


def _std_interval_mass(a: float, b: float) -> float:
    """Phi(b) - Phi(a), evaluated on the tail side to keep relative accuracy"""
    if a > 0:
        return float(special.ndtr(-a) - special.ndtr(-b))
    return float(special.ndtr(b) - special.ndtr(a))


dist_service = DistributionService()
