"""
Least-squares fit of the hidden-liquidity level H.

With P(z, H) = H + (1 - 2H) F(z) the squared error is a quadratic in H,
so the minimiser has a closed form; it is clamped to [0, 1/2].
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from .errors import DomainError, UnidentifiableError
from .estimator import bucket_label
from .model import CoefficientProfile, QuadratureControls, pup_general, pup_hidden

logger = logging.getLogger(__name__)


@dataclass
class FitResult:
    H: float
    sse: float
    n_points: int
    residuals: List[float]
    H_unclamped: float = 0.0
    z: List[float] = field(default_factory=list)
    empirical: List[float] = field(default_factory=list)
    base: List[float] = field(default_factory=list)
    counts: Optional[List[int]] = None

    def sse_at(self, H: float) -> float:
        e = np.asarray(self.empirical)
        f = np.asarray(self.base)
        return float(np.sum((e - (H + (1.0 - 2.0 * H) * f)) ** 2))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "H": self.H,
            "H_unclamped": self.H_unclamped,
            "sse": self.sse,
            "n_points": self.n_points,
            "z": self.z,
            "empirical": self.empirical,
            "residuals": self.residuals,
            "counts": self.counts,
        }


def fit_hidden_liquidity(empirical: pd.DataFrame, coeffs: CoefficientProfile,
                         quad: QuadratureControls = QuadratureControls()) -> FitResult:
    """Fit H to an empirical curve with columns ``midpoint`` and ``p_up`` (``count`` optional).

    Rows with a missing p_up are ignored.
    """
    for col in ("midpoint", "p_up"):
        if col not in empirical.columns:
            raise DomainError(f"Empirical curve needs a '{col}' column.")
    usable = empirical[empirical["p_up"].notna()]
    if len(usable) < 2:
        raise DomainError(f"At least 2 empirical points are needed, got {len(usable)}.")
    z = usable["midpoint"].to_numpy(float)
    e = usable["p_up"].to_numpy(float)
    F = pup_general(coeffs, quad, z=z).p

    d = 1.0 - 2.0 * F
    denom = float(np.sum(d * d))
    if denom <= 1e-14:
        raise UnidentifiableError("Model curve is 1/2 at every evaluation point, so H is not identifiable.")
    h_star = float(np.sum((e - F) * d) / denom)
    H = min(max(h_star, 0.0), 0.5)
    if H != h_star:
        logger.warning(f"Least-squares H={h_star:.4f} clamped to {H}")
    residuals = e - (H + (1.0 - 2.0 * H) * F)
    counts = usable["count"].astype(int).tolist() if "count" in usable.columns else None
    result = FitResult(
        H=H,
        sse=float(np.sum(residuals**2)),
        n_points=int(z.size),
        residuals=residuals.tolist(),
        H_unclamped=h_star,
        z=z.tolist(),
        empirical=e.tolist(),
        base=F.tolist(),
        counts=counts,
    )
    logger.info(f"Fitted hidden liquidity H={H:.6f} on {z.size} points, SSE={result.sse:.3e}")
    return result


def prediction_table(coeffs: CoefficientProfile, H: float, bucket_width: float = 0.05,
                     quad: QuadratureControls = QuadratureControls()) -> pd.DataFrame:
    """Model P_up at bucket midpoints, one row per imbalance bucket."""
    buckets = int(round(1.0 / bucket_width))
    if buckets < 1 or not np.isclose(buckets * bucket_width, 1.0):
        raise DomainError(f"Bucket width must divide 1, got {bucket_width}.")
    k = np.arange(buckets)
    mids = (k + 0.5) / buckets
    curve = pup_hidden(coeffs, H, quad, z=mids)
    return pd.DataFrame({
        "imbalance": [bucket_label(i, buckets) for i in k],
        "lo": k / buckets,
        "hi": (k + 1) / buckets,
        "midpoint": mids,
        "p_pred": curve.p,
    })
