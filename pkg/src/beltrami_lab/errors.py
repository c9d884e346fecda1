"""Exception types shared across the package."""

from __future__ import annotations


class BeltramiLabError(Exception):
    """Base class for package-specific failures."""


class ConvergenceError(BeltramiLabError):
    """Fixed-point iteration did not reach tolerance within max_iter.

    Carries the residual trace so callers can inspect the stalled iteration.
    """

    def __init__(self, message: str, trace: tuple[float, ...]):
        super().__init__(message)
        self.trace = trace


class InversionError(BeltramiLabError):
    """Newton inversion failed for one or more target points."""

    def __init__(self, message: str, indices, points):
        super().__init__(message)
        self.indices = tuple(int(i) for i in indices)
        self.points = tuple(complex(p) for p in points)


class DegenerateJacobianError(BeltramiLabError):
    """Map derivative too close to singular at a sample needed for inversion."""
