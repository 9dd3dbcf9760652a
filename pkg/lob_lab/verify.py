"""
Cross-checks between the discrete model, its diffusion limit and the
analytic probability.

- Euler-Maruyama first passage for the limiting diffusion
- scaling experiment: discrete first passage from sqrt(n)-scaled starts
- exact absorption probabilities of the constant-rate chain on a capped grid
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.sparse.csgraph import breadth_first_order
from scipy.sparse.linalg import spsolve

from .errors import CapInsufficientError, DomainError, DriftViolationError, NumericalFailureError
from .model import (
    CoefficientProfile,
    IntensityProfile,
    QuadratureControls,
    coefficients_from_intensities,
    imbalance,
    imbalance_array,
    pup_general,
    validate_driftless,
)
from .rng import PathStreams, check_seed
from .simulation import EFFECTS, LobState, RunConfig, RunMode, first_passage_prob

logger = logging.getLogger(__name__)


def _min_variance(coeffs: CoefficientProfile) -> float:
    return float(min(np.min(coeffs.sigma_b), np.min(coeffs.sigma_a)) ** 2)


@dataclass(frozen=True)
class EulerConfig:
    coeffs: CoefficientProfile
    x: float
    y: float
    h: Optional[float] = None
    horizon: Optional[float] = None
    paths: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.x <= 0 or self.y <= 0:
            raise DomainError(f"Initial queues must be positive, got ({self.x}, {self.y}).")
        if self.paths < 1:
            raise DomainError(f"Number of paths must be positive, got {self.paths}.")
        check_seed(self.seed)
        if self.step <= 0:
            raise DomainError(f"Step must be positive, got {self.step}.")
        if self.end < self.step:
            raise DomainError(f"Horizon {self.end} is shorter than the step {self.step}.")

    @property
    def step(self) -> float:
        return 1e-4 * (self.x + self.y) ** 2 if self.h is None else self.h

    @property
    def end(self) -> float:
        if self.horizon is not None:
            return self.horizon
        return 20.0 * (self.x + self.y) ** 2 / _min_variance(self.coeffs)


@dataclass(frozen=True)
class EulerEstimate:
    p_up: float
    stderr: float
    censor_fraction: float
    up: int
    down: int
    ties: int
    censored: int

    def to_dict(self) -> Dict[str, Any]:
        return {"p_up": self.p_up, "stderr": self.stderr, "censor_fraction": self.censor_fraction,
                "up": self.up, "down": self.down, "ties": self.ties, "censored": self.censored}


def _euler_lanes(cfg: EulerConfig, indices: np.ndarray) -> np.ndarray:
    """Per lane: 1 up, 0 down, 0.5 tie, nan censored."""
    streams = PathStreams(cfg.seed, indices, kind="normal")
    h = cfg.step
    root_h = math.sqrt(h)
    qb = np.full(indices.size, float(cfg.x))
    qa = np.full(indices.size, float(cfg.y))
    score = np.full(indices.size, np.nan)
    alive = np.arange(indices.size)
    steps = int(math.ceil(cfg.end / h))
    for _ in range(steps):
        if not alive.size:
            break
        xi = streams.draw(alive)
        sb, sa, rho = cfg.coeffs.at(imbalance_array(qb[alive], qa[alive]))
        qb[alive] += sb * root_h * xi[:, 0]
        qa[alive] += sa * root_h * (rho * xi[:, 0] + np.sqrt(1.0 - rho**2) * xi[:, 1])
        hit_a = qa[alive] <= 0
        hit_b = qb[alive] <= 0
        score[alive[hit_a & ~hit_b]] = 1.0
        score[alive[hit_b & ~hit_a]] = 0.0
        score[alive[hit_a & hit_b]] = 0.5
        alive = alive[~(hit_a | hit_b)]
    return score


def euler_first_passage(cfg: EulerConfig, workers: int = 1, chunk: int = 8192) -> EulerEstimate:
    chunks = [np.arange(lo, min(lo + chunk, cfg.paths), dtype=np.int64) for lo in range(0, cfg.paths, chunk)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = np.concatenate(list(pool.map(lambda idx: _euler_lanes(cfg, idx), chunks)))
    else:
        scores = np.concatenate([_euler_lanes(cfg, idx) for idx in chunks])

    done = scores[~np.isnan(scores)]
    censored = int(scores.size - done.size)
    if done.size == 0:
        p, stderr = float("nan"), float("nan")
    else:
        p = float(done.mean())
        stderr = math.sqrt(p * (1.0 - p) / done.size)
    estimate = EulerEstimate(
        p_up=p,
        stderr=stderr,
        censor_fraction=censored / scores.size,
        up=int(np.sum(done == 1.0)),
        down=int(np.sum(done == 0.0)),
        ties=int(np.sum(done == 0.5)),
        censored=censored,
    )
    logger.info(f"Euler first passage from ({cfg.x}, {cfg.y}), h={cfg.step:.3g}: p_up={p:.4f} +/- {stderr:.4f}")
    return estimate


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    x: int
    y: int
    p_hat: float
    stderr: float
    analytic: float
    censor_fraction: float

    @property
    def abs_error(self) -> float:
        return abs(self.p_hat - self.analytic)


@dataclass
class ConvergenceTable:
    rows: List[ConvergenceRow] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(r.n, r.p_hat, r.stderr, r.analytic, r.abs_error, r.censor_fraction) for r in self.rows],
            columns=["n", "p_hat", "stderr", "analytic", "abs_error", "censor_fraction"],
        )

    def is_nonincreasing(self, slack: float = 2.0) -> bool:
        """Errors never grow by more than ``slack`` combined standard errors."""
        for a, b in zip(self.rows, self.rows[1:]):
            if b.abs_error > a.abs_error + slack * math.hypot(a.stderr, b.stderr):
                return False
        return True


def convergence_experiment(profile: IntensityProfile, x: float, y: float, n_list: Sequence[int], paths: int,
                           seed: int = 0, horizon_factor: float = 20.0, workers: int = 1,
                           quad: QuadratureControls = QuadratureControls(),
                           require_driftless: bool = True) -> ConvergenceTable:
    report = validate_driftless(profile)
    if require_driftless and not report.ok:
        raise DriftViolationError(f"Profile violates the driftless condition at z={report.violations}.")
    if x <= 0 or y <= 0:
        raise DomainError(f"Initial queues must be positive, got ({x}, {y}).")
    coeffs = coefficients_from_intensities(profile)
    analytic = float(pup_general(coeffs, quad, z=[imbalance(x, y)]).p[0])
    min_var = _min_variance(coeffs)

    table = ConvergenceTable()
    for n in n_list:
        if n < 1:
            raise DomainError(f"Scale factors must be positive, got {n}.")
        xn, yn = int(math.ceil(x * math.sqrt(n))), int(math.ceil(y * math.sqrt(n)))
        horizon = horizon_factor * (xn + yn) ** 2 / min_var
        cfg = RunConfig(profile, LobState(xn, yn), horizon, seed, RunMode.FIRST_PASSAGE)
        est = first_passage_prob(cfg, paths, workers)
        row = ConvergenceRow(n, xn, yn, est.p_up, est.stderr, analytic, est.censor_fraction)
        logger.info(f"n={n} start=({xn}, {yn}): p_hat={row.p_hat:.4f} analytic={analytic:.4f} error={row.abs_error:.4f}")
        table.rows.append(row)
    return table


@dataclass(frozen=True)
class ChainOracleResult:
    p_up: float
    cap: int
    cap_change: float
    residual: float

    def to_dict(self) -> Dict[str, Any]:
        return {"p_up": self.p_up, "cap": self.cap, "cap_change": self.cap_change, "residual": self.residual}


def _absorption_probability(rates: np.ndarray, x: int, y: int, cap: int):
    """Solve for P(ask side empties first) on the interior states [1, cap]^2.

    Moves that would leave the grid through the cap are dropped. States that
    can no longer reach an empty queue have probability 0 and are left out
    of the solve.
    """
    i, j = np.meshgrid(np.arange(1, cap + 1), np.arange(1, cap + 1), indexing="ij")
    i, j = i.ravel(), j.ravel()
    size = cap * cap
    state = (i - 1) * cap + (j - 1)
    rows, cols, vals = [], [], []
    diag = np.zeros(size)
    rhs = np.zeros(size)
    exits = np.zeros(size, dtype=bool)
    for k in range(6):
        rate = float(rates[k])
        if rate == 0.0:
            continue
        ti, tj = i + EFFECTS[k, 0], j + EFFECTS[k, 1]
        up = tj == 0
        down = ti == 0
        inside = ~up & ~down & (ti <= cap) & (tj <= cap)
        diag[up | down | inside] += rate
        rhs[up] += rate
        exits |= up | down
        rows.append(state[inside])
        cols.append((ti[inside] - 1) * cap + (tj[inside] - 1))
        vals.append(np.full(int(inside.sum()), -rate))
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    vals = np.concatenate(vals) if vals else np.zeros(0)

    # states that reach an exit: search backwards from a virtual exit node
    sink = size
    back = sparse.csr_matrix(
        (np.ones(rows.size + int(exits.sum())),
         (np.concatenate([cols, np.full(int(exits.sum()), sink)]), np.concatenate([rows, state[exits]]))),
        shape=(size + 1, size + 1),
    )
    reached = breadth_first_order(back, sink, directed=True, return_predecessors=False)
    live = np.zeros(size + 1, dtype=bool)
    live[reached] = True
    live = live[:size]
    start = (x - 1) * cap + (y - 1)
    if not live[start]:
        raise NumericalFailureError(f"From ({x}, {y}) no sequence of events empties a queue.")

    keep = live[rows] & live[cols]
    position = np.cumsum(live) - 1
    n = int(live.sum())
    matrix = sparse.csc_matrix(
        (np.concatenate([vals[keep], diag[live]]),
         (np.concatenate([position[rows[keep]], np.arange(n)]), np.concatenate([position[cols[keep]], np.arange(n)]))),
        shape=(n, n),
    )
    b = rhs[live]
    u = spsolve(matrix, b)
    if not np.all(np.isfinite(u)):
        raise NumericalFailureError("Absorption system is singular.")
    residual = float(np.max(np.abs(matrix @ u - b)))
    return float(u[position[start]]), residual


def chain_oracle(profile: IntensityProfile, x: int, y: int, cap: int = 256, tol: float = 1e-6) -> ChainOracleResult:
    if not profile.is_constant:
        raise DomainError("The chain oracle needs constant intensities.")
    if x <= 0 or y <= 0:
        raise DomainError(f"Initial queues must be positive, got ({x}, {y}).")
    if max(x, y) >= cap // 2:
        raise DomainError(f"Cap {cap} leaves no room above the start ({x}, {y}); use a cap above {2 * max(x, y)}.")
    rates = profile.rates[0]
    coarse, _ = _absorption_probability(rates, x, y, cap // 2)
    fine, residual = _absorption_probability(rates, x, y, cap)
    change = abs(fine - coarse)
    logger.info(f"Chain oracle at ({x}, {y}), cap {cap}: p_up={fine:.10f}, cap change {change:.2e}, residual {residual:.2e}")
    if change > tol:
        raise CapInsufficientError(cap, change, tol)
    return ChainOracleResult(p_up=fine, cap=cap, cap_change=change, residual=residual)
