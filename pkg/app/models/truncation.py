from typing import Callable, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from app.models.arrays import FloatArray
from app.models.distributions import Box, Halfspace, IntervalUnion

Model = Callable[[np.ndarray], np.ndarray]
LabelSet = Union[IntervalUnion, Halfspace, Box]


class TruncatedRegressionInstance(BaseModel):
    """Covariates, true model and the label-space truncation set; the noise is N(0, 1)"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    covariates: FloatArray
    f_star: Model
    truncation: LabelSet

    @model_validator(mode="after")
    def _check(self) -> "TruncatedRegressionInstance":
        x = np.asarray(self.covariates, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.shape[0] < 1:
            raise ValueError("an instance needs at least one covariate")
        self.covariates = x
        if self.truncation.dim != 1:
            raise ValueError("the truncation set lives on the real line of labels")
        if not np.all(np.isfinite(self.means)):
            raise ValueError("f_star must be finite at every covariate")
        return self

    @property
    def size(self) -> int:
        return self.covariates.shape[0]

    @property
    def means(self) -> np.ndarray:
        return np.asarray(self.f_star(self.covariates), dtype=float).ravel()

    def with_truncation(self, truncation: LabelSet) -> "TruncatedRegressionInstance":
        return TruncatedRegressionInstance(
            covariates=self.covariates, f_star=self.f_star, truncation=truncation
        )
