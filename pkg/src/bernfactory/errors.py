"""Exception hierarchy.  The CLI maps these onto exit codes."""


class BernFactoryError(Exception):
    """Base class for library errors."""


class DomainError(BernFactoryError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ArgumentError(BernFactoryError, ValueError):
    """Structurally invalid arguments (lengths, degrees, unsupported α)."""


class PrecisionError(BernFactoryError, ArithmeticError):
    """Interval enclosures were too wide to decide a comparison."""


class RangeViolation(BernFactoryError):
    """Coefficients left [0, 1] (condition (i))."""


class ConstructionFailure(BernFactoryError):
    """The construct-then-certify loop ran out of retries."""

    def __init__(self, message: str, condition: str | None = None, rung: int | None = None):
        super().__init__(message)
        self.condition = condition
        self.rung = rung


class LadderConsistencyError(BernFactoryError):
    """Unit counts of consecutive stages are not nested."""


class ContractError(BernFactoryError):
    """Input files or ladders that break the documented data contract."""


class EmptyConstructionError(BernFactoryError):
    """A construction whose index set turned out empty."""


class InvalidSeriesError(BernFactoryError, ValueError):
    """A series form with a negative coefficient."""
