"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """Bad shapes, curvature, weights or hyperparameters."""


class InvalidData(ValueError):
    """Input data contains non-finite values."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ParseError(ValueError):
    """Malformed CSV input."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class NumericDegenerate(ArithmeticError):
    """A computation hit the ball boundary or an antipodal singularity."""

    def __init__(self, message, indices=None):
        super().__init__(message)
        self.indices = indices


class ConvergenceFailure(RuntimeError):
    """An iterative solver ran out of iterations."""

    def __init__(self, message, last_iterate, residual):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
