import logging
from typing import Optional

from scipy.interpolate import CubicSpline

from ..errors import DomainError
from .base import CoefficientProfile, PupCurve, imbalance

logger = logging.getLogger(__name__)


def pde_residual(coeffs: CoefficientProfile, curve: PupCurve, x: float, y: float, h: Optional[float] = None) -> float:
    """Apply the generator of the limiting diffusion to u(x, y) = P_up(x/(x+y)).

    Second derivatives are central differences with step ``h`` (default
    1% of x+y); the curve is read through a cubic spline of its samples.
    """
    if x <= 0 or y <= 0:
        raise DomainError(f"(x, y) must lie strictly inside the quadrant, got ({x}, {y}).")
    h = 0.01 * (x + y) if h is None else h
    if h <= 0:
        raise DomainError(f"Finite-difference step must be positive, got {h}.")
    if x - h <= 0 or y - h <= 0:
        raise DomainError(f"Stencil of width {h} around ({x}, {y}) leaves the quadrant.")

    spline = CubicSpline(curve.z, curve.p)

    def u(a: float, b: float) -> float:
        return float(spline(a / (a + b)))

    centre = u(x, y)
    u_xx = (u(x + h, y) - 2.0 * centre + u(x - h, y)) / h**2
    u_yy = (u(x, y + h) - 2.0 * centre + u(x, y - h)) / h**2
    u_xy = (u(x + h, y + h) - u(x + h, y - h) - u(x - h, y + h) + u(x - h, y - h)) / (4.0 * h**2)

    sb, sa, rho = (float(v) for v in coeffs.at(imbalance(x, y)))
    residual = sb**2 * u_xx + 2.0 * rho * sb * sa * u_xy + sa**2 * u_yy
    logger.debug(f"PDE residual at ({x}, {y}) with h={h}: {residual:.3e}")
    return residual
