import math
from typing import Optional, Tuple

import numpy as np
import structlog

from app.core.config import settings
from app.core.errors import DimensionMismatchError, InvalidParameterError, TrainingDivergedError
from app.core.rng import child_seed, generator
from app.models.distributions import LOG_CONCAVE_KINDS, Density, Gaussian
from app.models.estimates import Estimate
from app.models.icl import InitSpec, LSAParams, Prompt, PromptDistribution, TrainingTrace
from app.models.polynomial import McSpec
from app.models.reports import TransferReport
from app.services.dist import dist_service

logger = structlog.get_logger(__name__)

SHIFT_KINDS = ("task", "query", "covariate", "joint")
LOSS_DEGREE = 10
DIVERGENCE_LIMIT = 1e6


class ICLService:
    """Linear self-attention on linear-regression prompts: forward pass, loss, training, shifts"""

    def __init__(self):
        self.default_constant = settings.ICL_CONSTANT
        self.default_exponent = settings.ICL_EXPONENT

    # ------------------------------------------------------------------
    # Prompts
    # ------------------------------------------------------------------

    def draw_batch(
        self, dist: PromptDistribution, size: int, rng: np.random.Generator
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(E, w, x_query) stacked over ``size`` independent prompts"""
        n, N = dist.n, dist.N
        x = dist_service.draw(dist.P_X, size * N, rng).reshape(size, N, n)
        x_query = dist_service.draw(dist.P_X_query, size, rng)
        w = dist_service.draw(dist.P_H, size, rng)
        E = np.zeros((size, n + 1, N + 1))
        E[:, :n, :N] = np.transpose(x, (0, 2, 1))
        E[:, n, :N] = np.einsum("bkn,bn->bk", x, w)
        E[:, :n, N] = x_query
        return E, w, x_query

    def build_prompt(self, dist: PromptDistribution, seed: int) -> Prompt:
        E, w, x_query = self.draw_batch(dist, 1, generator(seed))
        return Prompt(E=E[0], w=w[0], x_query=x_query[0])

    # ------------------------------------------------------------------
    # Model
    # ------------------------------------------------------------------

    @staticmethod
    def _check_shapes(E: np.ndarray, params: LSAParams) -> None:
        if params.W_PV.shape[0] != E.shape[-2]:
            raise DimensionMismatchError(params.W_PV.shape[0], E.shape[-2], "prompt rows")

    def lsa_forward(self, E: np.ndarray, params: LSAParams) -> np.ndarray:
        """E + W_PV E (E^T W_KQ E) / rho"""
        E = np.asarray(E, dtype=float)
        self._check_shapes(E, params)
        return E + params.W_PV @ E @ (E.T @ params.W_KQ @ E) / params.rho

    def predict_query(self, E: np.ndarray, params: LSAParams) -> float:
        return float(self.lsa_forward(E, params)[-1, -1])

    def predict_closed_form(self, E: np.ndarray, params: LSAParams) -> float:
        """(1/rho) e_{n+1}^T W_PV (E E^T) W_KQ x~_query with x~_query = (x_query; 0)"""
        E = np.asarray(E, dtype=float)
        self._check_shapes(E, params)
        x_tilde = E[:, -1]
        return float(params.W_PV[-1] @ (E @ E.T) @ params.W_KQ @ x_tilde / params.rho)

    def _batch_predict(self, E: np.ndarray, params: LSAParams):
        M = np.einsum("bik,bjk->bij", E, E)
        s = E[:, :, -1] @ params.W_KQ.T
        Ms = np.einsum("bij,bj->bi", M, s)
        v = params.W_PV[-1]
        return Ms @ v / params.rho, M, s, Ms

    def build_H(self, E_data: np.ndarray, x_query: np.ndarray, N: Optional[int] = None) -> np.ndarray:
        """(X / 2) kron (E E^T / N) with X = [[0, x_query], [x_query^T, 0]]"""
        E_data = np.asarray(E_data, dtype=float)
        x_query = np.atleast_1d(np.asarray(x_query, dtype=float))
        n = x_query.shape[0]
        if E_data.shape[0] != n + 1:
            raise DimensionMismatchError(n + 1, E_data.shape[0], "prompt rows")
        N = N or E_data.shape[1]
        E = np.column_stack([E_data, np.append(x_query, 0.0)])
        X = np.zeros((n + 1, n + 1))
        X[:n, n] = x_query
        X[n, :n] = x_query
        return np.kron(X / 2.0, E @ E.T / N)

    @staticmethod
    def init_params(n: int, N: int, init: InitSpec, seed: int = 0) -> LSAParams:
        if init.kind == "zeros":
            return LSAParams.zeros(n, N)
        if init.kind == "random":
            rng = generator(seed)
            return LSAParams(
                W_PV=init.scale * rng.standard_normal((n + 1, n + 1)),
                W_KQ=init.scale * rng.standard_normal((n + 1, n + 1)),
                rho=N,
            )
        W_PV = np.zeros((n + 1, n + 1))
        W_PV[n, n] = init.scale
        W_KQ = np.zeros((n + 1, n + 1))
        W_KQ[:n, :n] = init.scale * np.eye(n)
        return LSAParams(W_PV=W_PV, W_KQ=W_KQ, rho=N)

    def plug_in_optimum(self, cov, N: int, scale: float = 1.0) -> LSAParams:
        """Parameters predicting x_query^T Gamma (1/N) sum_i x_i y_i with Gamma = scale * cov^-1"""
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        n = cov.shape[0]
        W_PV = np.zeros((n + 1, n + 1))
        W_PV[n, n] = 1.0
        W_KQ = np.zeros((n + 1, n + 1))
        W_KQ[:n, :n] = scale * np.linalg.inv(cov)
        return LSAParams(W_PV=W_PV, W_KQ=W_KQ, rho=N)

    @staticmethod
    def loss_bands(n: int, N: int, M: int, cov) -> Tuple[float, float]:
        """(epsilon, eta): test-length term (n+1)/N Tr S and training-length term (1+2n+n^2 k)/M^2 Tr S"""
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        trace = float(np.trace(cov))
        kappa = float(np.linalg.cond(cov))
        return (n + 1) / N * trace, (1 + 2 * n + n * n * kappa) / M**2 * trace

    def icl_loss_polynomial(self, params: LSAParams, n: int, N: int):
        """Fixed-parameter loss as a function of the n(N+2) variables (x_1..x_N, x_query, w)"""

        def loss(z: np.ndarray) -> np.ndarray:
            z = np.atleast_2d(np.asarray(z, dtype=float))
            if z.shape[1] != n * (N + 2):
                raise DimensionMismatchError(n * (N + 2), z.shape[1], "loss input")
            x = z[:, : n * N].reshape(-1, N, n)
            x_query = z[:, n * N : n * (N + 1)]
            w = z[:, n * (N + 1) :]
            E = np.zeros((z.shape[0], n + 1, N + 1))
            E[:, :n, :N] = np.transpose(x, (0, 2, 1))
            E[:, n, :N] = np.einsum("bkn,bn->bk", x, w)
            E[:, :n, N] = x_query
            pred = self._batch_predict(E, params)[0]
            return (pred - np.sum(w * x_query, axis=1)) ** 2

        return loss

    # ------------------------------------------------------------------
    # Loss and training
    # ------------------------------------------------------------------

    def population_loss(
        self, dist: PromptDistribution, params: LSAParams, mc: Optional[McSpec] = None
    ) -> Estimate:
        """Monte Carlo E[(y^_query - w^T x_query)^2] over fresh prompts"""
        mc = mc or McSpec(n_samples=20_000)
        E, w, x_query = self.draw_batch(dist, mc.n_samples, generator(mc.seed))
        pred = self._batch_predict(E, params)[0]
        err = (pred - np.sum(w * x_query, axis=1)) ** 2
        stderr = float(err.std(ddof=1) / math.sqrt(err.size)) if err.size > 1 else 0.0
        return Estimate(value=float(err.mean()), stderr=stderr, n_samples=err.size)

    def loss_and_gradient(
        self, E: np.ndarray, w: np.ndarray, x_query: np.ndarray, params: LSAParams
    ) -> Tuple[float, np.ndarray, np.ndarray]:
        """Batch-mean squared loss with exact gradients for W_PV and W_KQ"""
        pred, M, s, Ms = self._batch_predict(E, params)
        resid = pred - np.sum(w * x_query, axis=1)
        scale = 2.0 * resid / (E.shape[0] * params.rho)
        grad_PV = np.zeros_like(params.W_PV)
        grad_PV[-1] = scale @ Ms
        Mv = np.einsum("bij,j->bi", M, params.W_PV[-1])
        grad_KQ = np.einsum("b,bi,bj->ij", scale, Mv, E[:, :, -1])
        return float(np.mean(resid**2)), grad_PV, grad_KQ

    def train_lsa(
        self,
        dist: PromptDistribution,
        init: Optional[InitSpec] = None,
        steps: int = 20_000,
        learning_rate: float = 1e-2,
        batch_size: int = 256,
        seed: int = 0,
        record_every: int = 100,
        max_grad_norm: Optional[float] = 10.0,
    ) -> Tuple[LSAParams, TrainingTrace]:
        """Mini-batch gradient descent on the prompt loss; aborts once the loss exceeds 1e6"""
        init = init or InitSpec()
        params = self.init_params(dist.n, dist.N, init, child_seed(seed, 0))
        trace = TrainingTrace()
        W_PV, W_KQ = params.W_PV.copy(), params.W_KQ.copy()
        logger.info("train_lsa_start", n=dist.n, N=dist.N, steps=steps, lr=learning_rate, batch=batch_size)

        for step in range(steps):
            E, w, x_query = self.draw_batch(dist, batch_size, generator(seed, step + 1))
            loss, g_pv, g_kq = self.loss_and_gradient(E, w, x_query, params.copy_with(W_PV, W_KQ))
            grad_norm = float(np.sqrt(np.sum(g_pv**2) + np.sum(g_kq**2)))
            if not np.isfinite(loss) or loss > DIVERGENCE_LIMIT:
                raise TrainingDivergedError(f"loss {loss:.3g} at step {step}", trace=trace)
            if step % record_every == 0 or step == steps - 1:
                trace.record(step, loss, grad_norm)
            if max_grad_norm is not None and grad_norm > max_grad_norm:
                g_pv, g_kq = g_pv * (max_grad_norm / grad_norm), g_kq * (max_grad_norm / grad_norm)
            W_PV -= learning_rate * g_pv
            W_KQ -= learning_rate * g_kq

        logger.info("train_lsa_done", final_loss=trace.losses[-1] if trace.losses else None)
        return params.copy_with(W_PV, W_KQ), trace

    # ------------------------------------------------------------------
    # Distribution shift
    # ------------------------------------------------------------------

    def _shifted_factor(
        self, source: PromptDistribution, target: PromptDistribution, shift_kind: str
    ) -> Tuple[Optional[Density], Optional[Density], list]:
        names = {"task": "P_H", "query": "P_X_query", "covariate": "P_X"}
        if shift_kind == "joint":
            return None, None, [n for n in names.values()]
        shifted = names[shift_kind]
        fixed = [n for n in names.values() if n != shifted]
        return getattr(source, shifted), getattr(target, shifted), fixed

    def _factor_coefficient(
        self, P_f: Density, Q_f: Density, bridge: Optional[Density], c: int
    ) -> Tuple[float, str, list]:
        """log of |dQ/dmu|_inf |dP/dmu|_inf^c with the bridge, catalog bridge, or mu = Q"""
        if P_f == Q_f:
            return 0.0, "identical", []
        if bridge is not None:
            log_q = math.log(dist_service.density_ratio_sup(Q_f, bridge).value)
            log_p = math.log(dist_service.density_ratio_sup(P_f, bridge).value)
            return log_q + c * log_p, bridge.label, []
        if (
            isinstance(P_f, Gaussian)
            and isinstance(Q_f, Gaussian)
            and np.allclose(P_f.cov, np.eye(P_f.dim))
            and np.allclose(Q_f.cov, np.eye(Q_f.dim))
        ):
            shift = (np.asarray(Q_f.mean) - np.asarray(P_f.mean)).tolist()
            bridge_c = dist_service.bridge_construct("gaussianNd", mu=shift)
            return (1 + c) * math.log(bridge_c.normalizer), "catalog:gaussian_nd", []
        if Q_f.kind in LOG_CONCAVE_KINDS:
            ratio = dist_service.density_ratio_sup(P_f, Q_f)
            if math.isinf(ratio.value):
                return math.inf, "target-is-log-concave", ["infinite_ratio"]
            return c * math.log(ratio.value), "target-is-log-concave", []
        return math.inf, "none", ["no_log_concave_bridge"]

    def shift_report(
        self,
        params: LSAParams,
        source: PromptDistribution,
        target: PromptDistribution,
        shift_kind: str,
        mc: Optional[McSpec] = None,
        bridge: Optional[Density] = None,
        C: Optional[float] = None,
        c: Optional[int] = None,
    ) -> TransferReport:
        """L_Q against C |dQ/dmu|_inf |dP/dmu|_inf^c L_P for the shifted prompt factor"""
        if shift_kind not in SHIFT_KINDS:
            raise InvalidParameterError(f"shift kind must be one of {SHIFT_KINDS}, got '{shift_kind}'")
        C = self.default_constant if C is None else C
        c = self.default_exponent if c is None else c
        mc = mc or McSpec(n_samples=20_000)

        L_P = self.population_loss(source, params, mc)
        L_Q = self.population_loss(target, params, mc)
        flags = []
        if L_P.value <= 3.0 * L_P.stderr:
            flags.append("degenerate")

        P_f, Q_f, fixed = self._shifted_factor(source, target, shift_kind)
        for name in fixed:
            if getattr(source, name).kind not in LOG_CONCAVE_KINDS:
                flags.append(f"{name}_not_log_concave")
        if P_f is None:
            log_coef, label = math.inf, "none"
            flags.append("joint_shift_needs_bridge")
        else:
            log_coef, label, extra = self._factor_coefficient(P_f, Q_f, bridge, c)
            flags += extra
        coefficient = math.inf if log_coef > 700 else C * math.exp(log_coef)

        report = TransferReport(
            kind="icl",
            degree=LOSS_DEGREE,
            constant=C,
            bridge=label,
            coefficient=coefficient,
            lhs=L_Q.value,
            lhs_se=L_Q.stderr,
            rhs=coefficient * L_P.value,
            rhs_se=coefficient * L_P.stderr if math.isfinite(coefficient) else 0.0,
            shift_kind=shift_kind,
            flags=flags + [f"exponent={c}"],
        )
        logger.info("icl_shift_report", shift=shift_kind, L_P=L_P.value, L_Q=L_Q.value, coefficient=coefficient)
        return report


icl_service = ICLService()
