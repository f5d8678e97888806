"""Exception hierarchy shared across the package."""

from __future__ import annotations


class WeightedGCError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(WeightedGCError, ValueError):
    pass


class NumericalFailureError(WeightedGCError, ArithmeticError):
    pass


class RankDeficiencyError(WeightedGCError, ValueError):
    def __init__(self, rank: int, cols: int):
        super().__init__(f"matrix is rank deficient: numerical rank {rank} < {cols} columns")
        self.rank = rank
        self.cols = cols


class InvalidDistributionError(WeightedGCError, ValueError):
    pass


class DivisibilityError(WeightedGCError, ValueError):
    pass


class ConsistencyError(WeightedGCError, ValueError):
    """A sketch plan does not belong to the partition it is used with."""


class InfeasibleParametersError(WeightedGCError, ValueError):
    pass


class MaskError(WeightedGCError, ValueError):
    pass


class ArityError(WeightedGCError, ValueError):
    pass


class StragglerModelError(WeightedGCError, ValueError):
    pass


class FormatError(WeightedGCError, ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class EmptyClassError(WeightedGCError, ValueError):
    pass


class DivergenceError(WeightedGCError, ArithmeticError):
    def __init__(self, message: str, trace):
        super().__init__(message)
        self.trace = trace


class ConditioningWarning(UserWarning):
    """Decode residual exceeded the conditioning guard."""
