"""Exception hierarchy shared across the toolkit.

Every failure on malformed input is a structured error carrying enough
context (line numbers, offending values) to be actionable; internal
invariant violations raise plain AssertionError and are bugs.
"""


class QnnvError(Exception):
    """Base class for all toolkit errors."""


class ModelFormatError(QnnvError):
    """Malformed model text (NNET or JSON interchange)."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DimensionError(QnnvError):
    """Shape mismatch between declared and actual dimensions."""


class FxpError(QnnvError):
    """Invalid fixed-point configuration or operand mismatch."""


class FxpDivisionByZero(FxpError):
    """Fixed-point division by a zero raw value."""


class LutError(QnnvError):
    """Lookup-table construction or audit failure."""


class PropertyError(QnnvError):
    """Property DSL syntax or semantic error."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f"line {line}"
            if col is not None:
                where += f", col {col}"
            where += ": "
        super().__init__(where + message)


class VacuousPropertyError(PropertyError):
    """Assume set is contradictory: the input domain is empty."""


class EncodingError(QnnvError):
    """SMT encoding cannot be produced (missing LUT, width overflow)."""


class DecodeError(QnnvError):
    """Solver model text could not be mapped back to input values."""


class GridTooLarge(QnnvError):
    """Brute-force enumeration refused: grid exceeds the point limit."""

    def __init__(self, size, limit):
        self.size = size
        self.limit = limit
        super().__init__(f"grid has {size} points, exceeds limit {limit}")


class SolverNotFound(QnnvError):
    """No usable SMT solver executable could be located."""


class UsageError(QnnvError):
    """Invalid CLI or RunConfig usage."""
