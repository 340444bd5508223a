"""Exception types shared across the toolkit."""

from __future__ import annotations


class PolaronLabError(Exception):
    """Base class for all toolkit errors."""


class QuadratureError(PolaronLabError):
    """An adaptive quadrature failed to reach its requested tolerance."""

    def __init__(self, message: str, achieved_tol: float | None = None):
        super().__init__(message)
        self.achieved_tol = achieved_tol


class IntegrationError(PolaronLabError):
    """An ODE integration failed; carries the solver's diagnostic message."""


class FitConvergenceError(PolaronLabError):
    """A least-squares fit did not converge within the iteration budget."""

    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


class ConfigError(PolaronLabError):
    """A scenario config failed validation before any computation started."""
