import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import stats

from app.core.config import settings
from app.core.errors import InvalidParameterError, TrainingDivergedError
from app.core.rng import child_seed, generator
from app.models.estimates import Estimate
from app.models.gotu import DiagonalLinearNet, GOTURunSummary, GOTUScaling, GOTUTrace, LinearTarget
from app.services.boolean import default_degree_constant

logger = structlog.get_logger(__name__)

# The seen set {x_k = 1} has half of the uniform mass.
SEEN_MASS = 0.5


class GOTUService:
    """Gradient flow of diagonal linear networks on the canonical holdout {x_k = 1}"""

    def __init__(self):
        self.threshold = settings.GOTU_THRESHOLD
        self.time_constant = settings.GOTU_TIME_CONSTANT

    @staticmethod
    def init_weights(n: int, L: int, alpha: float, seed: int) -> DiagonalLinearNet:
        if not 0 < alpha <= 0.5:
            raise InvalidParameterError(f"init scale alpha must lie in (0, 1/2], got {alpha}")
        if L < 2:
            raise InvalidParameterError("depth must be at least 2")
        w = generator(seed).uniform(-alpha, alpha, size=(L, n))
        return DiagonalLinearNet(b=0.0, w=w)

    def alpha_max(
        self, L: int, eps: float, f_star: LinearTarget, k: int, c_T: Optional[float] = None
    ) -> Estimate:
        """((L-2) R T_eps + (8/eps)^((L-2)/L))^(1/(2-L)), T_eps = c_T log(R/eps); 1/2 at L = 2"""
        if L == 2:
            return Estimate(value=0.5, flags=["depth_two_fallback"])
        if L < 2 or eps <= 0:
            raise InvalidParameterError("need L >= 2 and eps > 0")
        c_T = self.time_constant if c_T is None else c_T
        R = 1.0 + abs(f_star.bias + f_star.coefficients[k])
        T_eps = c_T * math.log(R / eps)
        base = (L - 2) * R * T_eps + (8.0 / eps) ** ((L - 2) / L)
        return Estimate(value=base ** (1.0 / (2 - L)))

    @staticmethod
    def _residuals(net: DiagonalLinearNet, f_star: LinearTarget, k: int) -> Tuple[np.ndarray, float]:
        """Per-coordinate residuals pi_i - c_i and the bias residual b - b*"""
        r = net.effective - np.asarray(f_star.coefficients)
        return r, net.b - f_star.bias

    def closed_form_losses(self, net: DiagonalLinearNet, f_star: LinearTarget, k: int) -> Tuple[float, float]:
        """(L_S, L): exact expectations over U_S = uniform on {x_k = 1} and U"""
        r, rb = self._residuals(net, f_star, k)
        rest = float(np.sum(r**2) - r[k] ** 2)
        seen = (rb + r[k]) ** 2 + rest
        full = rb**2 + r[k] ** 2 + rest
        return float(seen), float(full)

    def mc_losses(
        self, net: DiagonalLinearNet, f_star: LinearTarget, k: int, n_samples: int = 100_000, seed: int = 0
    ) -> Tuple[Estimate, Estimate]:
        x = generator(seed).choice(np.array([-1.0, 1.0]), size=(n_samples, net.n))
        diff_coef = net.effective - np.asarray(f_star.coefficients)
        diff_bias = net.b - f_star.bias

        def estimate(points: np.ndarray) -> Estimate:
            err = (diff_bias + points @ diff_coef) ** 2
            return Estimate(
                value=float(err.mean()), stderr=float(err.std(ddof=1) / math.sqrt(n_samples)), n_samples=n_samples
            )

        full = estimate(x)
        x[:, k] = 1.0
        return estimate(x), full

    @staticmethod
    def tau(net: DiagonalLinearNet, f_star: LinearTarget) -> Estimate:
        """max_i D(i) / sum_i D(i) with D(i) = (pi_i - c_i)^2; flagged once the sum vanishes"""
        delta = (net.effective - np.asarray(f_star.coefficients)) ** 2
        total = float(delta.sum())
        if total <= 1e-18:
            return Estimate(value=math.nan, flags=["converged"])
        return Estimate(value=float(delta.max() / total))

    def _gradient(
        self, b: float, w: np.ndarray, f_star: LinearTarget, k: int
    ) -> Tuple[float, np.ndarray, float]:
        pi = np.prod(w, axis=0)
        r = pi - np.asarray(f_star.coefficients)
        r[k] += b - f_star.bias
        seen = float(np.sum(r**2))
        L = w.shape[0]
        prefix = np.ones_like(w)
        suffix = np.ones_like(w)
        for l in range(1, L):
            prefix[l] = prefix[l - 1] * w[l - 1]
        for l in range(L - 2, -1, -1):
            suffix[l] = suffix[l + 1] * w[l + 1]
        grad_w = 2.0 * r * prefix * suffix
        return 2.0 * r[k], grad_w, seen

    def gradient_flow(
        self,
        net: DiagonalLinearNet,
        f_star: LinearTarget,
        k: int,
        step: float = 1e-3,
        T: float = 20.0,
        record_every: int = 100,
        c0: Optional[float] = None,
    ) -> GOTUTrace:
        """Explicit Euler on -grad L_S; the step halves whenever L_S would increase"""
        if step > 1e-2:
            raise InvalidParameterError(f"Euler step must be <= 1e-2, got {step}")
        if f_star.n != net.n or not 0 <= k < net.n:
            raise InvalidParameterError("target dimension or held-out coordinate does not match the network")
        c0 = self.threshold if c0 is None else c0
        trace = GOTUTrace(
            k=k,
            threshold=c0,
            transfer_constant=default_degree_constant(1) * SEEN_MASS ** (-2),
        )
        b, w = float(net.b), net.w.copy()
        t, h, count = 0.0, step, 0
        self._record(trace, t, b, w, f_star, k)
        while t < T - 1e-12:
            h = min(h, T - t)
            grad_b, grad_w, seen = self._gradient(b, w, f_star, k)
            while True:
                b_new, w_new = b - h * grad_b, w - h * grad_w
                if not np.all(np.isfinite(w_new)) or not math.isfinite(b_new):
                    raise TrainingDivergedError(f"non-finite parameters at t={t:.4g}", trace=trace)
                _, _, seen_new = self._gradient(b_new, w_new, f_star, k)
                if seen_new <= seen + 1e-9 * h or h < 1e-12:
                    break
                h /= 2.0
                trace.halvings += 1
                logger.debug("gotu_step_halved", t=t, step=h)
            b, w, t = b_new, w_new, t + h
            count += 1
            if count % record_every == 0 or t >= T - 1e-12:
                self._record(trace, t, b, w, f_star, k)
        trace.final_net = DiagonalLinearNet(b=b, w=w)
        trace.t_star = self.critical_time(trace, c0)
        logger.info(
            "gradient_flow_done", n=net.n, L=net.depth, T=T, t_star=trace.t_star, halvings=trace.halvings
        )
        return trace

    def _record(self, trace: GOTUTrace, t: float, b: float, w: np.ndarray, f_star: LinearTarget, k: int) -> None:
        net = DiagonalLinearNet(b=b, w=w)
        seen, full = self.closed_form_losses(net, f_star, k)
        trace.record(t, seen, full, self.tau(net, f_star).value, float(net.effective[k]))

    @staticmethod
    def critical_time(trace: GOTUTrace, c0: float) -> Optional[float]:
        """First time tau exceeds c0, linearly interpolated between records"""
        if not trace.times:
            raise InvalidParameterError("trace is empty")
        prev_t, prev_tau = None, None
        for t, tau in zip(trace.times, trace.tau):
            if math.isnan(tau):
                continue
            if tau > c0:
                if prev_t is None:
                    return t
                return prev_t + (c0 - prev_tau) / (tau - prev_tau) * (t - prev_t)
            prev_t, prev_tau = t, tau
        return None

    @staticmethod
    def transfer_coupling(trace: GOTUTrace) -> bool:
        """L / L_S <= recorded constant at every record before t_star"""
        horizon = math.inf if trace.t_star is None else trace.t_star
        for t, seen, full in zip(trace.times, trace.seen_loss, trace.full_loss):
            if t >= horizon:
                break
            if seen > 0 and full / seen > trace.transfer_constant:
                return False
        return True

    def run_ensemble(
        self,
        ns: Sequence[int],
        seeds: Sequence[int],
        L: int = 2,
        alpha: float = 0.1,
        step: float = 1e-3,
        T: float = 20.0,
        record_every: int = 50,
        c0: Optional[float] = None,
    ) -> GOTUScaling:
        """t_star(n) for the all-ones target, per-n medians and slope against log n"""
        runs: List[GOTURunSummary] = []
        medians: List[Optional[float]] = []
        for n in ns:
            f_star = LinearTarget.all_ones(n)
            found = []
            for seed in seeds:
                net = self.init_weights(n, L, alpha, child_seed(seed, n))
                trace = self.gradient_flow(net, f_star, 0, step, T, record_every, c0)
                runs.append(GOTURunSummary(n=n, L=L, alpha=alpha, seed=seed, t_star=trace.t_star))
                if trace.t_star is not None:
                    found.append(trace.t_star)
            medians.append(float(np.median(found)) if found else None)

        points = [(math.log(n), m) for n, m in zip(ns, medians) if m is not None]
        slope = float(stats.linregress(*zip(*points)).slope) if len(points) >= 2 else None
        logger.info("gotu_scaling", ns=list(ns), medians=medians, slope=slope)
        return GOTUScaling(runs=runs, ns=list(ns), median_t_star=medians, slope_vs_log_n=slope)


gotu_service = GOTUService()
