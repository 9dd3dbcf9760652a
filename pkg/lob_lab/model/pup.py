"""
Price-move probability for imbalance-dependent diffusion coefficients.

P_up solves a first-order linear ODE in the imbalance z, so it reduces to
two nested integrals of exp(-int mu/nu). Both integrals use the trapezoid
rule on one shared refinement grid.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..errors import DomainError, NumericalFailureError, SingularCoefficientError
from .base import ArrayLike, CoefficientProfile, PupCurve, QuadratureControls

logger = logging.getLogger(__name__)

NU_FLOOR = 1e-12


def mu_nu(coeffs: CoefficientProfile, z: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    z = np.asarray(z, dtype=float)
    sb, sa, rho = coeffs.at(z)
    cross = rho * sb * sa
    mu = -2.0 * (1.0 - z) * sb**2 + 2.0 * (2.0 * z - 1.0) * cross + 2.0 * z * sa**2
    nu = (1.0 - z) ** 2 * sb**2 - 2.0 * z * (1.0 - z) * cross + z**2 * sa**2
    low = nu < NU_FLOOR
    if np.any(low):
        first = int(np.flatnonzero(low.reshape(-1))[0])
        raise SingularCoefficientError(float(z.reshape(-1)[first]), float(nu.reshape(-1)[first]))
    return mu, nu


def _targets(quad: QuadratureControls, z: Optional[ArrayLike]) -> np.ndarray:
    targets = quad.grid() if z is None else np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(~np.isfinite(targets)) or np.any(targets < 0) or np.any(targets > 1):
        raise DomainError("Imbalance values must lie in [0, 1].")
    return targets


def _normalised_mass(coeffs: CoefficientProfile, panels: int, targets: np.ndarray) -> np.ndarray:
    grid = np.union1d(np.linspace(0.0, 1.0, panels + 1), targets)
    mu, nu = mu_nu(coeffs, grid)
    slope = mu / nu
    bad = ~np.isfinite(slope)
    if np.any(bad):
        z_bad = float(grid[bad][0])
        raise NumericalFailureError(f"Integrand mu/nu is not finite at z={z_bad:.6g}.", z=z_bad)
    log_weight = -cumulative_trapezoid(slope, grid, initial=0.0)
    weight = np.exp(log_weight - log_weight.max())
    mass = cumulative_trapezoid(weight, grid, initial=0.0)
    if not np.isfinite(mass[-1]) or mass[-1] <= 0:
        raise NumericalFailureError("Normalising integral is not positive and finite.")
    return (mass / mass[-1])[np.searchsorted(grid, targets)]


def pup_general(coeffs: CoefficientProfile, quad: QuadratureControls = QuadratureControls(),
                z: Optional[ArrayLike] = None) -> PupCurve:
    """P_up without hidden liquidity on ``z`` (default: the quadrature output grid).

    The error estimate is the largest change against a run on half the panels.
    """
    targets = _targets(quad, z)
    fine = _normalised_mass(coeffs, quad.panels, targets)
    coarse = _normalised_mass(coeffs, quad.halved().panels, targets)
    error = float(np.max(np.abs(fine - coarse))) if targets.size else 0.0
    logger.debug(f"pup_general on {targets.size} points, {quad.panels} panels, error estimate {error:.2e}")
    return PupCurve(H=0.0, z=targets, p=fine, error_estimate=error)


def pup_hidden(coeffs: CoefficientProfile, H: float, quad: QuadratureControls = QuadratureControls(),
               z: Optional[ArrayLike] = None) -> PupCurve:
    if not 0.0 <= H <= 0.5:
        raise DomainError(f"Hidden liquidity H must lie in [0, 1/2], got {H}.")
    base = pup_general(coeffs, quad, z)
    return PupCurve(H=H, z=base.z, p=H + (1.0 - 2.0 * H) * base.p, error_estimate=(1.0 - 2.0 * H) * base.error_estimate)
