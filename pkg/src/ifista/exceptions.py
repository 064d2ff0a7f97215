"""Exception types shared across the package."""

from __future__ import annotations


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class InnerSolverCapError(RuntimeError):
    """Inner (dual) solver hit its iteration cap before reaching the target gap."""

    def __init__(self, message: str, best_gap: float, iterations: int):
        super().__init__(message)
        self.best_gap = best_gap
        self.iterations = iterations


class DivergenceError(RuntimeError):
    """Objective gap grew past the divergence guard for too many iterations."""

    def __init__(self, message: str, k: int):
        super().__init__(message)
        self.k = k


class ReferenceError(RuntimeError):
    """Reference solve failed to reach the requested tolerance within its cap."""
