"""Error types raised across the library."""


class SchemaError(ValueError):
    """A CSV file does not match the declared column roles."""


class ParseError(ValueError):
    """A feature cell could not be parsed as a number."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class SizingError(ValueError):
    """A dataset is too small for the requested split sizes."""


class ConvergenceError(RuntimeError):
    """Training did not reach the gradient tolerance in the iteration budget."""

    def __init__(self, message, grad_norm):
        super().__init__(message)
        self.grad_norm = grad_norm


class GroupCoverageError(ValueError):
    """A protected group has no samples in the evaluated subset."""

    def __init__(self, group):
        super().__init__(f"group {group} has no samples in the evaluated subset")
        self.group = group


class BudgetRangeError(ValueError):
    """No noise level in the searched range meets the privacy target."""


class ConfigError(ValueError):
    """An experiment configuration is invalid."""
