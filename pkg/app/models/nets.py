from typing import List, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.arrays import FloatArray

Activation = Literal["relu", "poly"]

# 2 inputs, five hidden layers of 20, one of 10, scalar output
DEFAULT_LAYERS = [2, 20, 20, 20, 20, 20, 10, 1]


class MLP(BaseModel):
    """Fully connected network; every layer but the last is followed by the activation"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    sizes: List[int] = Field(default_factory=lambda: list(DEFAULT_LAYERS))
    activation: Activation = "relu"
    weights: List[FloatArray]
    biases: List[FloatArray]

    @model_validator(mode="after")
    def _shapes(self) -> "MLP":
        if len(self.sizes) < 2:
            raise ValueError("an MLP needs at least an input and an output layer")
        if len(self.weights) != len(self.sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("one weight matrix and bias vector per layer transition")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.sizes[i], self.sizes[i + 1]) or b.shape != (self.sizes[i + 1],):
                raise ValueError(f"layer {i} has shape {w.shape}/{b.shape}, expected sizes {self.sizes}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i} has non-finite parameters")
        return self

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    @property
    def input_dim(self) -> int:
        return self.sizes[0]


class NetTrainingTrace(BaseModel):
    epochs: List[int] = Field(default_factory=list)
    losses: List[float] = Field(default_factory=list)

    def record(self, epoch: int, loss: float) -> None:
        self.epochs.append(epoch)
        self.losses.append(loss)

    def rows(self) -> List[dict]:
        return [{"epoch": e, "mse": l} for e, l in zip(self.epochs, self.losses)]
