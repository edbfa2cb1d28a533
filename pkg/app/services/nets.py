from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog

from app.core.errors import DimensionMismatchError, InvalidParameterError, TrainingDivergedError
from app.core.rng import generator
from app.models.nets import DEFAULT_LAYERS, MLP, Activation, NetTrainingTrace

logger = structlog.get_logger(__name__)

ADAGRAD_EPS = 1e-8
BATCH_SIZE = 64
DIVERGENCE_LIMIT = 1e12


def _activate(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return 3.0 * z**2 - 2.0 * z**3


def _activate_grad(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return (z > 0).astype(float)
    return 6.0 * z - 6.0 * z**2


class NetService:
    """Small feed-forward networks with hand-written backpropagation"""

    @staticmethod
    def init_mlp(
        sizes: Optional[Sequence[int]] = None, activation: Activation = "relu", seed: int = 0
    ) -> MLP:
        """Weights and biases uniform in +-1/sqrt(fan_in), one Philox stream per seed"""
        sizes = list(DEFAULT_LAYERS if sizes is None else sizes)
        rng = generator(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return MLP(sizes=sizes, activation=activation, weights=weights, biases=biases)

    def _check_input(self, m: MLP, x) -> Tuple[np.ndarray, bool]:
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
        if arr.shape[1] != m.input_dim:
            raise DimensionMismatchError(m.input_dim, arr.shape[1], "network input")
        return arr, single

    def _forward_cache(self, m: MLP, x: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        """Layer inputs and pre-activations for backpropagation"""
        inputs, pre = [], []
        h = x
        last = len(m.weights) - 1
        for i, (w, b) in enumerate(zip(m.weights, m.biases)):
            inputs.append(h)
            z = h @ w + b
            pre.append(z)
            h = z if i == last else _activate(m.activation, z)
        return inputs, pre

    def forward(self, m: MLP, x):
        """Network output; a float for a single point, a vector for a batch"""
        arr, single = self._check_input(m, x)
        _, pre = self._forward_cache(m, arr)
        out = pre[-1][:, 0]
        return float(out[0]) if single else out

    def backprop(
        self, m: MLP, x, grad_out: np.ndarray
    ) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        """Gradients of sum_j grad_out[j] * m(x_j) w.r.t. every weight and bias"""
        arr, _ = self._check_input(m, x)
        inputs, pre = self._forward_cache(m, arr)
        delta = np.asarray(grad_out, dtype=float).reshape(-1, 1)
        grads_w: List[np.ndarray] = [None] * len(m.weights)
        grads_b: List[np.ndarray] = [None] * len(m.weights)
        for i in range(len(m.weights) - 1, -1, -1):
            grads_w[i] = inputs[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            if i:
                delta = (delta @ m.weights[i].T) * _activate_grad(m.activation, pre[i - 1])
        return grads_w, grads_b

    @staticmethod
    def flatten(m: MLP) -> np.ndarray:
        parts = []
        for w, b in zip(m.weights, m.biases):
            parts.extend([w.ravel(), b])
        return np.concatenate(parts)

    @staticmethod
    def unflatten(m: MLP, theta: np.ndarray) -> MLP:
        theta = np.asarray(theta, dtype=float)
        if theta.size != m.n_params:
            raise DimensionMismatchError(m.n_params, theta.size, "parameter vector")
        weights, biases, pos = [], [], 0
        for w, b in zip(m.weights, m.biases):
            weights.append(theta[pos : pos + w.size].reshape(w.shape))
            pos += w.size
            biases.append(theta[pos : pos + b.size].copy())
            pos += b.size
        return MLP(sizes=m.sizes, activation=m.activation, weights=weights, biases=biases)

    def output_gradient(self, m: MLP, x) -> np.ndarray:
        """d m(x) / d theta at a single point, in flatten() order"""
        grads_w, grads_b = self.backprop(m, np.atleast_2d(x), np.ones(1))
        return np.concatenate([p for w, b in zip(grads_w, grads_b) for p in (w.ravel(), b)])

    def loss_and_gradient(self, m: MLP, x, y) -> Tuple[float, np.ndarray]:
        """Mean squared error over the batch and its gradient in flatten() order"""
        arr, _ = self._check_input(m, x)
        y = np.asarray(y, dtype=float).ravel()
        _, pre = self._forward_cache(m, arr)
        resid = pre[-1][:, 0] - y
        grads_w, grads_b = self.backprop(m, arr, 2.0 * resid / y.size)
        grad = np.concatenate([p for w, b in zip(grads_w, grads_b) for p in (w.ravel(), b)])
        return float(np.mean(resid**2)), grad

    def mse(self, m: MLP, x, y) -> float:
        resid = np.atleast_1d(self.forward(m, np.atleast_2d(x))) - np.asarray(y, dtype=float).ravel()
        return float(np.mean(resid**2))

    def train_adagrad(
        self,
        m: MLP,
        x,
        y,
        epochs: int = 100,
        rate: float = 1e-2,
        seed: int = 0,
        batch_size: int = BATCH_SIZE,
    ) -> Tuple[MLP, NetTrainingTrace]:
        """Mini-batch AdaGrad on the mean squared error; reshuffles every epoch"""
        arr, _ = self._check_input(m, x)
        y = np.asarray(y, dtype=float).ravel()
        if arr.shape[0] == 0 or arr.shape[0] != y.size:
            raise InvalidParameterError("dataset must be nonempty with one target per input")
        if rate < 0 or epochs < 0:
            raise InvalidParameterError("rate and epochs must be non-negative")

        rng = generator(seed)
        theta = self.flatten(m)
        accumulated = np.zeros_like(theta)
        trace = NetTrainingTrace()
        current = m
        trace.record(0, self.mse(current, arr, y))
        for epoch in range(1, epochs + 1):
            order = rng.permutation(arr.shape[0])
            for start in range(0, order.size, batch_size):
                idx = order[start : start + batch_size]
                _, grad = self.loss_and_gradient(current, arr[idx], y[idx])
                accumulated += grad**2
                theta = theta - rate * grad / np.sqrt(accumulated + ADAGRAD_EPS)
                if not np.all(np.isfinite(theta)):
                    raise TrainingDivergedError(f"non-finite parameters in epoch {epoch}", trace=trace)
                current = self.unflatten(current, theta)
            loss = self.mse(current, arr, y)
            trace.record(epoch, loss)
            if not np.isfinite(loss) or loss > DIVERGENCE_LIMIT:
                raise TrainingDivergedError(f"training loss {loss:.3g} in epoch {epoch}", trace=trace)
        logger.info(
            "adagrad_done",
            activation=m.activation,
            epochs=epochs,
            rate=rate,
            seed=seed,
            final_mse=trace.losses[-1],
        )
        return current, trace


net_service = NetService()
