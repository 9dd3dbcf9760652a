"""Closed-form P_up for Brownian queues with constant correlation and equal volatilities."""

import numpy as np

from ..errors import DomainError
from .base import ArrayLike


def _arctan_ratio(signed_gap: np.ndarray, rho: float) -> np.ndarray:
    if not -1.0 <= rho <= 1.0:
        raise DomainError(f"Correlation must lie in [-1, 1], got {rho}.")
    if rho == 1.0:
        raise DomainError("rho = +1 is degenerate: both queues move together and never separate.")
    if rho == -1.0:
        return signed_gap
    k = np.sqrt((1.0 + rho) / (1.0 - rho))
    return np.arctan(k * signed_gap) / np.arctan(k)


def pup_closed_form_corr(x: float, y: float, rho: float) -> float:
    if x <= 0 or y <= 0:
        raise DomainError(f"Queue sizes must be positive, got x={x}, y={y}.")
    gap = (y - x) / (y + x)
    return float(0.5 * (1.0 - _arctan_ratio(np.asarray(gap), rho)))


def pup_closed_form_imbalance(z: ArrayLike, rho: float) -> np.ndarray:
    """Same formula written in the imbalance z = x/(x+y); defined on all of [0, 1]."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or np.any(z > 1):
        raise DomainError("Imbalance values must lie in [0, 1].")
    return 0.5 * (1.0 - _arctan_ratio(1.0 - 2.0 * z, rho))
