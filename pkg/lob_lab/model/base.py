"""
Domain types for the queue model: imbalance, intensity and coefficient
curves, quadrature controls and probability curves.

Curves are piecewise linear on knots in [0, 1] with flat extrapolation
outside the knot range. All types are immutable after construction.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..errors import DegenerateProfileError, DomainError, ProfileError

logger = logging.getLogger(__name__)

RATE_COLUMNS = [f"lambda{j}" for j in range(1, 7)]
COEFFICIENT_COLUMNS = ["sigma_b", "sigma_a", "rho"]

ArrayLike = Union[float, Sequence[float], np.ndarray]


def imbalance(x: float, y: float) -> float:
    """Bid share of the best-quote volume; 1/2 for two empty queues."""
    if x < 0 or y < 0:
        raise DomainError(f"Queue sizes must be nonnegative, got x={x}, y={y}.")
    total = x + y
    if total == 0:
        return 0.5
    return x / total


def imbalance_array(x: ArrayLike, y: ArrayLike) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise DomainError("Queue sizes must be nonnegative.")
    total = x + y
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(total > 0, x / np.where(total > 0, total, 1.0), 0.5)
    return z


def _check_knots(z: np.ndarray, name: str):
    if z.ndim != 1 or z.size == 0:
        raise ProfileError(f"{name} needs at least one knot.")
    if not np.all(np.isfinite(z)) or z[0] < 0 or z[-1] > 1:
        raise ProfileError(f"{name} knots must lie in [0, 1].")
    if np.any(np.diff(z) <= 0):
        raise ProfileError(f"{name} knots must be strictly increasing.")


def _read_knot_csv(path: Union[str, Path], columns: List[str], name: str) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ProfileError(f"Cannot read {name} knots from {path}: {e}") from e
    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in ["z", *columns] if c not in frame.columns]
    if missing:
        raise ProfileError(f"{name} knot file {path} is missing columns {missing}.")
    return frame


@dataclass(frozen=True)
class QuadratureControls:
    """Refinement grid for the quadrature and the default output grid."""
    panels: int = 4096
    points: int = 101

    def __post_init__(self):
        if self.panels < 64:
            raise DomainError(f"Quadrature needs at least 64 panels, got {self.panels}.")
        if self.points < 2:
            raise DomainError(f"Output grid needs at least 2 points, got {self.points}.")

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.points)

    def halved(self) -> "QuadratureControls":
        return QuadratureControls(panels=max(self.panels // 2, 64), points=self.points)


@dataclass(frozen=True, eq=False)
class IntensityProfile:
    """The six order-flow intensities as functions of imbalance.

    ``rates`` has one row per knot and one column per event kind (1..6).
    """
    z: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        z = np.array(self.z, dtype=float).reshape(-1)
        rates = np.array(self.rates, dtype=float).reshape(-1, 6)
        _check_knots(z, "Intensity profile")
        if rates.shape[0] != z.size:
            raise ProfileError(f"Intensity profile has {z.size} knots but {rates.shape[0]} rate rows.")
        if not np.all(np.isfinite(rates)) or np.any(rates < 0):
            raise ProfileError("Intensities must be finite and nonnegative.")
        z.setflags(write=False)
        rates.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "rates", rates)

    @classmethod
    def constant(cls, rates: Sequence[float]) -> "IntensityProfile":
        row = np.asarray(rates, dtype=float)
        if row.size != 6:
            raise ProfileError(f"Expected six intensities, got {row.size}.")
        return cls(z=np.array([0.0, 1.0]), rates=np.vstack([row, row]))

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.rates == self.rates[0]))

    def rates_at(self, z: ArrayLike) -> np.ndarray:
        """Intensities at imbalance ``z``; shape ``z.shape + (6,)``."""
        z = np.asarray(z, dtype=float)
        if self.z.size == 1:
            return np.broadcast_to(self.rates[0], z.shape + (6,)).copy()
        cols = [np.interp(z, self.z, self.rates[:, j]) for j in range(6)]
        return np.stack(cols, axis=-1)

    def check_points(self) -> np.ndarray:
        """Knots together with the midpoints between neighbouring knots."""
        mids = 0.5 * (self.z[1:] + self.z[:-1])
        return np.sort(np.concatenate([self.z, mids]))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.rates, columns=RATE_COLUMNS)
        frame.insert(0, "z", self.z)
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "IntensityProfile":
        ordered = frame.sort_values("z")
        return cls(z=ordered["z"].to_numpy(float), rates=ordered[RATE_COLUMNS].to_numpy(float))

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "IntensityProfile":
        profile = cls.from_frame(_read_knot_csv(path, RATE_COLUMNS, "Intensity"))
        logger.info(f"Loaded intensity profile with {profile.z.size} knots from {path}")
        return profile


@dataclass(frozen=True, eq=False)
class CoefficientProfile:
    """Volatilities of the bid and ask queues and their correlation, per imbalance."""
    z: np.ndarray
    sigma_b: np.ndarray
    sigma_a: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        z = np.array(self.z, dtype=float).reshape(-1)
        _check_knots(z, "Coefficient profile")
        arrays = {}
        for name in COEFFICIENT_COLUMNS:
            values = np.array(getattr(self, name), dtype=float).reshape(-1)
            if values.size != z.size:
                raise ProfileError(f"Coefficient column {name} has {values.size} values for {z.size} knots.")
            if not np.all(np.isfinite(values)):
                raise ProfileError(f"Coefficient column {name} contains non-finite values.")
            arrays[name] = values
        if np.any(arrays["sigma_b"] <= 0) or np.any(arrays["sigma_a"] <= 0):
            raise ProfileError("Volatilities must be strictly positive at every knot.")
        if np.any(np.abs(arrays["rho"]) > 1):
            raise ProfileError("Correlation must lie in [-1, 1] at every knot.")
        for name, values in [("z", z), *arrays.items()]:
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    @classmethod
    def constant(cls, sigma_b: float, sigma_a: float, rho: float) -> "CoefficientProfile":
        ones = np.ones(2)
        return cls(z=np.array([0.0, 1.0]), sigma_b=sigma_b * ones, sigma_a=sigma_a * ones, rho=rho * ones)

    def at(self, z: ArrayLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=float)
        if self.z.size == 1:
            return tuple(np.full(z.shape, getattr(self, name)[0]) for name in COEFFICIENT_COLUMNS)
        return tuple(np.interp(z, self.z, getattr(self, name)) for name in COEFFICIENT_COLUMNS)

    def scaled(self, factor: float) -> "CoefficientProfile":
        if factor <= 0:
            raise DomainError(f"Scale factor must be positive, got {factor}.")
        return CoefficientProfile(z=self.z, sigma_b=self.sigma_b * factor, sigma_a=self.sigma_a * factor, rho=self.rho)

    def is_symmetric(self, atol: float = 1e-12) -> bool:
        """True when sigma_b(z) = sigma_a(1-z) and rho(z) = rho(1-z) on the knots."""
        points = np.union1d(self.z, 1.0 - self.z)
        sb, sa, rho = self.at(points)
        sb_m, sa_m, rho_m = self.at(1.0 - points)
        return bool(np.allclose(sb, sa_m, atol=atol) and np.allclose(rho, rho_m, atol=atol))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"z": self.z, "sigma_b": self.sigma_b, "sigma_a": self.sigma_a, "rho": self.rho})

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "CoefficientProfile":
        ordered = frame.sort_values("z")
        return cls(
            z=ordered["z"].to_numpy(float),
            sigma_b=ordered["sigma_b"].to_numpy(float),
            sigma_a=ordered["sigma_a"].to_numpy(float),
            rho=ordered["rho"].to_numpy(float),
        )

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "CoefficientProfile":
        profile = cls.from_frame(_read_knot_csv(path, COEFFICIENT_COLUMNS, "Coefficient"))
        logger.info(f"Loaded coefficient profile with {profile.z.size} knots from {path}")
        return profile


@dataclass(frozen=True, eq=False)
class PupCurve:
    """Probability that the ask queue depletes first, sampled on a z-grid."""
    H: float
    z: np.ndarray
    p: np.ndarray
    error_estimate: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.H <= 0.5:
            raise DomainError(f"Hidden liquidity must lie in [0, 1/2], got {self.H}.")

    def __call__(self, z: ArrayLike) -> np.ndarray:
        return np.interp(np.asarray(z, dtype=float), self.z, self.p)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"z": self.z, "p": self.p})

    def endpoint_report(self, tol: float = 1e-8) -> Dict[str, Any]:
        report: Dict[str, Any] = {"H": self.H, "error_estimate": self.error_estimate}
        if self.z.size and self.z[0] == 0.0:
            report["p_at_0"] = float(self.p[0])
            report["p_at_0_ok"] = bool(abs(self.p[0] - self.H) <= tol)
        if self.z.size and self.z[-1] == 1.0:
            report["p_at_1"] = float(self.p[-1])
            report["p_at_1_ok"] = bool(abs(self.p[-1] - (1.0 - self.H)) <= tol)
        return report


@dataclass(frozen=True)
class DriftlessReport:
    ok: bool
    tol: float
    violations: List[float] = field(default_factory=list)
    max_deviation: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {"ok": self.ok, "tol": self.tol, "violations": self.violations, "max_deviation": self.max_deviation}


def validate_driftless(profile: IntensityProfile, tol: float = 1e-9) -> DriftlessReport:
    """Check lambda1-lambda2 = lambda6-lambda5 = lambda4-lambda3 at knots and midpoints."""
    points = profile.check_points()
    lam = profile.rates_at(points)
    bid_drift = lam[:, 0] - lam[:, 1]
    swap_drift = lam[:, 5] - lam[:, 4]
    ask_drift = lam[:, 3] - lam[:, 2]
    deviation = np.maximum(np.abs(bid_drift - swap_drift), np.abs(swap_drift - ask_drift))
    bad = deviation > tol
    report = DriftlessReport(
        ok=not bool(np.any(bad)),
        tol=tol,
        violations=[float(z) for z in points[bad]],
        max_deviation=float(deviation.max()) if deviation.size else 0.0,
    )
    if not report.ok:
        logger.debug(f"Driftless condition fails at {len(report.violations)} points, max deviation {report.max_deviation:.3g}")
    return report


def coefficients_from_intensities(profile: IntensityProfile) -> CoefficientProfile:
    lam = profile.rates
    var_b = lam[:, 0] + lam[:, 1] + lam[:, 4] + lam[:, 5]
    var_a = lam[:, 2] + lam[:, 3] + lam[:, 4] + lam[:, 5]
    degenerate = (var_b <= 0) | (var_a <= 0)
    if np.any(degenerate):
        where = profile.z[degenerate]
        raise DegenerateProfileError(f"Total intensity vanishes on one side at z={where.tolist()}.")
    sigma_b = np.sqrt(var_b)
    sigma_a = np.sqrt(var_a)
    rho = -(lam[:, 4] + lam[:, 5]) / (sigma_b * sigma_a)
    return CoefficientProfile(z=profile.z, sigma_b=sigma_b, sigma_a=sigma_a, rho=np.clip(rho, -1.0, 0.0))
