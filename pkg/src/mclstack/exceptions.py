"""Exception types raised across the package."""


class DimensionMismatchError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class MatrixFormatError(ValueError):
    """A sparse structure violates its storage invariants."""


class BudgetInfeasibleError(ValueError):
    """The memory budget cannot hold even a single output column."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class GraphParseError(ValueError):
    """An input graph file is malformed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
