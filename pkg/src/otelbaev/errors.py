"""Exception types shared across modules."""

from .measure import InvalidSpecError


class NumericFailure(RuntimeError):
    """A numerical procedure could not reach its tolerance."""


class BracketError(NumericFailure):
    """Doubling/halving failed to bracket a root."""


class DivergentQuantity(ArithmeticError):
    """A quantity requested as finite is +inf."""


__all__ = ["InvalidSpecError", "NumericFailure", "BracketError", "DivergentQuantity"]
