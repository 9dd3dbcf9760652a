"""
P_up for correlated Brownian queues with constant drifts.

A linear change of variables turns the two queues into a standard planar
Brownian motion started inside a wedge of opening angle ``alpha``. The
ask queue empties when the motion leaves through the ray at angle
``alpha``. With zero drift the answer is the angle ratio; otherwise the
exit density (a modified-Bessel series) is integrated against the
Girsanov tilt over exit time and exit radius.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import ive

from ..errors import DomainError, NumericalFailureError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WedgeQuadrature:
    """Midpoint nodes in log-time and in radius per time node."""
    t_nodes: int = 400
    r_nodes: int = 256
    tolerance: float = 1e-6

    def __post_init__(self):
        if self.t_nodes < 16 or self.r_nodes < 16:
            raise DomainError("Wedge quadrature needs at least 16 nodes in each direction.")
        if self.tolerance <= 0:
            raise DomainError("Wedge quadrature tolerance must be positive.")


@dataclass(frozen=True)
class DriftedBmSpec:
    mu_b: float
    mu_a: float
    sigma_b: float
    sigma_a: float
    rho: float
    x: float
    y: float
    series_terms: int = 40
    quad: WedgeQuadrature = WedgeQuadrature()

    def __post_init__(self):
        if self.sigma_b <= 0 or self.sigma_a <= 0:
            raise DomainError("Volatilities must be positive.")
        if not -1.0 < self.rho < 1.0:
            raise DomainError(f"Correlation must lie strictly inside (-1, 1), got {self.rho}.")
        if self.x <= 0 or self.y <= 0:
            raise DomainError(f"Initial queue sizes must be positive, got x={self.x}, y={self.y}.")
        if self.series_terms < 1:
            raise DomainError("At least one series term is required.")

    @property
    def _whitening(self) -> np.ndarray:
        s = math.sqrt(1.0 - self.rho**2)
        return np.array([[self.sigma_a * s, self.sigma_a * self.rho], [0.0, self.sigma_b]])

    @property
    def gamma(self) -> Tuple[float, float]:
        g = np.linalg.solve(self._whitening, [self.mu_a, self.mu_b])
        return float(g[0]), float(g[1])

    @property
    def start(self) -> Tuple[float, float]:
        s = np.linalg.solve(self._whitening, [self.y, self.x])
        return float(s[0]), float(s[1])

    @property
    def alpha(self) -> float:
        s = math.sqrt(1.0 - self.rho**2)
        if self.rho > 0:
            return math.pi + math.atan(-s / self.rho)
        if self.rho == 0:
            return math.pi / 2
        return math.atan(-s / self.rho)

    @property
    def r0(self) -> float:
        u = self.x / self.sigma_b
        v = self.y / self.sigma_a
        return math.sqrt(u * u + v * v - 2.0 * self.rho * u * v) / math.sqrt(1.0 - self.rho**2)

    @property
    def theta0(self) -> float:
        u = self.x / self.sigma_b
        v = self.y / self.sigma_a
        gap = v - self.rho * u
        if gap < 0:
            return math.pi + math.atan(u * math.sqrt(1.0 - self.rho**2) / gap)
        if gap == 0:
            return math.pi / 2
        return math.atan(u * math.sqrt(1.0 - self.rho**2) / gap)


def pup_drifted_bm(spec: DriftedBmSpec) -> float:
    alpha, theta0, r0 = spec.alpha, spec.theta0, spec.r0
    ga, gb = spec.gamma
    speed2 = ga * ga + gb * gb
    if speed2 == 0.0:
        return theta0 / alpha

    za, zb = spec.start
    speed = math.sqrt(speed2)
    n = np.arange(1, spec.series_terms + 1)
    order = n * math.pi / alpha
    weight = n * np.sin(n * math.pi * (alpha - theta0) / alpha)
    cos_a, sin_a = math.cos(alpha), math.sin(alpha)

    # distance from the start to the exit ray
    gap = alpha - theta0
    dist = r0 * math.sin(gap) if gap < math.pi / 2 else r0
    t_lo = dist * dist / 55.0
    # drift along the exit ray does not shorten the time to exit
    along = max(ga * cos_a + gb * sin_a, 0.0)
    decay = speed2 - along * along
    t_hi = max(200.0 * r0 * r0, 60.0 / decay if decay > 1e-12 * speed2 else 1e8 * r0 * r0)
    edges = np.linspace(math.log(t_lo), math.log(t_hi), spec.quad.t_nodes + 1)
    ds = edges[1] - edges[0]
    times = np.exp(0.5 * (edges[1:] + edges[:-1]))

    total = 0.0
    last_term = 0.0
    density = 0.0
    for t in times:
        half = 10.0 * math.sqrt(t) + speed * t
        r_lo = max(0.0, r0 - half)
        r_edges = np.linspace(r_lo, r0 + half, spec.quad.r_nodes + 1)
        dr = r_edges[1] - r_edges[0]
        r = 0.5 * (r_edges[1:] + r_edges[:-1])
        bessel = ive(order[:, None], (r * r0 / t)[None, :])
        exponent = -((r - r0) ** 2) / (2.0 * t) + ga * (r * cos_a - za) + gb * (r * sin_a - zb) - 0.5 * speed2 * t
        radial = math.pi / (alpha * alpha * t * r) * np.exp(exponent)
        density = float(np.sum(radial * (weight @ bessel)) * dr)
        total += density * t * ds
        last_term += float(np.sum(radial * weight[-1] * bessel[-1]) * dr) * t * ds

    tail = abs(last_term) + abs(density) * t_hi
    logger.debug(f"Drifted wedge integral {total:.8f} with tail estimate {tail:.2e}")
    if not math.isfinite(total) or tail > spec.quad.tolerance:
        raise NumericalFailureError(
            f"Drifted Brownian integral did not converge (tail estimate {tail:.3g}); raise series_terms or nodes.",
            tail_estimate=tail,
        )
    return float(min(max(total, 0.0), 1.0))
