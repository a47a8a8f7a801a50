"""Exception types raised across the engine.

Every failure mode that callers are expected to branch on gets its own
class; nothing here is ever swallowed into a default fallback.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class AllZeroMass(EngineError):
    """Every candidate explanation received zero weight; no posterior exists."""


class NotEnumerable(EngineError):
    """An exhaustive operation was asked of a space that cannot be enumerated."""


class ZeroStartMass(EngineError):
    """A Markov chain was started from a state with zero posterior mass."""


class BadSpec(EngineError):
    """A generator, family, or config request that names nothing supported."""


class ParseError(EngineError):
    """A CSV cell could not be parsed. Carries 1-based row and column."""

    def __init__(self, message: str, row: int, col: int):
        super().__init__(f"{message} (row {row}, col {col})")
        self.row = row
        self.col = col


class NonNumericFeature(ParseError):
    """A feature cell held a non-numeric value."""


class SingularCovariance(EngineError):
    """A covariance estimate is singular and regularization was disabled."""


class DimensionMismatch(EngineError):
    """Array shapes disagree with the model or dataset they are used with."""


class MissingClass(EngineError):
    """An example subset fails to cover a class the inference target needs."""


class ZeroTotalWeight(EngineError):
    """A weighted average was requested but all weights are zero."""


class SingularSystem(EngineError):
    """A least-squares system is rank deficient; the fit is not identified."""


class IncompatibleCombination(EngineError):
    """A requested (inference target, explanation, learner) triple violates
    the compatibility rules. The message states the violated rule."""


class StrategySpaceMismatch(EngineError):
    """A search strategy was paired with a space it cannot operate on."""


class InsufficientCoverage(EngineError):
    """A probe set leaves part of the predicted-value range unsampled."""
