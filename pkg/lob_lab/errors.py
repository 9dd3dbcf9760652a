"""
Exception hierarchy for the laboratory.

Library functions raise these; only the command handlers catch them.
Errors caused by bad inputs also derive from ValueError so callers that
only know about ValueError keep working.
"""

from typing import Any, Dict, List, Optional


class LobLabError(Exception):
    """Root of every error raised by lob_lab."""


class DomainError(LobLabError, ValueError):
    """An argument lies outside the domain of the operation."""


class ProfileError(DomainError):
    """A knot curve is malformed (unsorted knots, negative rates, bad ranges)."""


class DegenerateProfileError(ProfileError):
    """Total intensity vanishes at a knot so a volatility would be zero."""


class SingularCoefficientError(DomainError):
    def __init__(self, z: float, nu: float):
        super().__init__(f"Coefficient nu vanishes at z={z:.6g} (nu={nu:.3g}); rho=+1 with matched volatilities is not supported.")
        self.z = z
        self.nu = nu


class NumericalFailureError(LobLabError):
    def __init__(self, message: str, z: Optional[float] = None, tail_estimate: Optional[float] = None):
        super().__init__(message)
        self.z = z
        self.tail_estimate = tail_estimate


class InconclusiveExperimentError(LobLabError):
    """No path resolved before the horizon."""


class CapInsufficientError(LobLabError):
    def __init__(self, cap: int, change: float, tol: float):
        super().__init__(f"Chain cap {cap} is too small: doubling from {cap // 2} changed the answer by {change:.3g} > {tol:.3g}.")
        self.cap = cap
        self.change = change
        self.tol = tol


class QuoteFormatError(LobLabError, ValueError):
    """The quote file lacks a mandatory column or cannot be read at all."""


class IngestionError(LobLabError):
    def __init__(self, malformed: int, total: int, diagnostics: List[Dict[str, Any]]):
        super().__init__(f"{malformed} of {total} quote rows are malformed (first: {diagnostics[:1]}).")
        self.malformed = malformed
        self.total = total
        self.diagnostics = diagnostics


class OrderingError(LobLabError, ValueError):
    """Records inside a partition are not sorted by time."""


class InsufficientDataError(LobLabError):
    """Too few populated buckets to build a profile."""


class UnidentifiableError(LobLabError):
    """The hidden-liquidity objective is flat in H."""


class ConfigError(LobLabError, ValueError):
    """A run configuration file is missing, unreadable or inconsistent."""


class DriftViolationError(LobLabError):
    """Strict mode refuses an intensity profile that violates the driftless condition."""
