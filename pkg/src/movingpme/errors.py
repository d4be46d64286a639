"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class AssumptionError(RuntimeError):
    """Mesh validity or density nonnegativity failed where it is required."""


class PivotError(ArithmeticError):
    """Cholesky factorization met a non-positive pivot."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"non-positive pivot at index {index}")


class ConvergenceError(RuntimeError):
    """An iterative process stopped before reaching its tolerance."""

    def __init__(self, message, history=None, residual=None):
        super().__init__(message)
        self.history = history if history is not None else []
        self.residual = residual


class FormatError(ValueError):
    """Malformed mesh, snapshot or config file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
