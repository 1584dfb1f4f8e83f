"""Exception types shared across the package."""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid scenario/configuration input (CLI exit code 2)."""


class GridError(ValueError):
    """Delay or frequency grid does not satisfy an operation's contract."""


class MaterialWindowError(ValueError):
    """Frequency outside a dispersion model's validity window."""


class NonConvergenceError(RuntimeError):
    """Iterative fit or quadrature refinement failed (CLI exit code 3)."""


class TermConsistencyError(RuntimeError):
    """Internal cross-check between interferogram terms failed."""
