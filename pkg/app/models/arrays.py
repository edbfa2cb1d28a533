from typing import Annotated

import numpy as np
from pydantic import BeforeValidator


def _float_array(value):
    return None if value is None else np.asarray(value, dtype=float)


def _bool_array(value):
    return None if value is None else np.asarray(value, dtype=bool)


# Array fields accept nested lists as well as ndarrays; models still need arbitrary_types_allowed.
FloatArray = Annotated[np.ndarray, BeforeValidator(_float_array)]
BoolArray = Annotated[np.ndarray, BeforeValidator(_bool_array)]
