"""Shared exception types."""


class NonConvergenceError(RuntimeError):
    """Fixed-point iteration ran out of iterations; carries the defect history."""

    def __init__(self, message, defects=()):
        super().__init__(message)
        self.defects = tuple(float(d) for d in defects)
