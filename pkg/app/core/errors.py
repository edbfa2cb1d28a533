from typing import Any, Optional


class PolyTransferError(Exception):
    """Base class for every library error"""


class DimensionMismatchError(PolyTransferError):
    def __init__(self, expected: int, got: int, what: str = "input"):
        super().__init__(f"{what} has dimension {got}, expected {expected}")
        self.expected = expected
        self.got = got


class InvalidParameterError(PolyTransferError, ValueError):
    """A parameter is outside the range an operation accepts"""


class RejectionBudgetExceededError(PolyTransferError):
    def __init__(self, acceptance: float, floor: float):
        super().__init__(
            f"rejection acceptance {acceptance:.3g} below floor {floor:.3g}; refusing to sample"
        )
        self.acceptance = acceptance


class RankDeficientError(PolyTransferError):
    def __init__(self, rank: int, n_basis: int):
        super().__init__(
            f"normal equations are rank deficient ({rank} < {n_basis}); use ridge > 0"
        )
        self.rank = rank
        self.n_basis = n_basis


class NonFiniteValueError(PolyTransferError):
    def __init__(self, point: Any, value: float):
        super().__init__(f"non-finite value {value} at point {point}")
        self.point = point
        self.value = value


class MassTooSmallError(PolyTransferError):
    def __init__(self, mass: float, floor: float):
        super().__init__(f"truncation mass {mass:.3g} below usable floor {floor:.3g}")
        self.mass = mass
        self.floor = floor


class EnumerationLimitError(PolyTransferError):
    def __init__(self, n: int, limit: int):
        super().__init__(f"n={n} exceeds the enumeration cap n <= {limit}")
        self.n = n


class TrainingDivergedError(PolyTransferError):
    def __init__(self, message: str, trace: Optional[Any] = None):
        super().__init__(message)
        self.trace = trace


class UnknownExperimentError(PolyTransferError):
    def __init__(self, name: str, known: list[str]):
        super().__init__(f"unknown experiment '{name}'; known: {', '.join(sorted(known))}")
        self.name = name
        self.known = list(known)


class ConfigError(PolyTransferError):
    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key
