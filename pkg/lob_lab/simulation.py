"""
Exact event-driven simulation of the level-1 queue model.

Between events the six intensities depend only on the imbalance before the
event, so they are constant: the waiting time is exponential with the
total rate and the event kind is categorical in the individual rates.
Every event consumes two uniforms from the path's own stream.

A queue that reaches zero ends the path: the price moves up when the ask
queue empties and down when the bid queue empties.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum, IntEnum
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from .errors import DomainError, InconclusiveExperimentError
from .model import IntensityProfile, imbalance_array
from .rng import PathStreams, check_seed

logger = logging.getLogger(__name__)


class EventKind(IntEnum):
    BID_LIMIT = 1
    BID_MARKET = 2
    ASK_LIMIT = 3
    ASK_MARKET = 4
    ASK_TO_BID = 5
    BID_TO_ASK = 6


# (dx, dy) for kinds 1..6
EFFECTS = np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [1, -1], [-1, 1]], dtype=np.int64)


class RunMode(str, Enum):
    FREE_RUN = "free-run"
    FIRST_PASSAGE = "first-passage"


class Outcome(str, Enum):
    UP = "up"
    DOWN = "down"
    CENSORED = "censored"
    STALLED = "stalled"


_OUTCOMES = [Outcome.UP, Outcome.DOWN, Outcome.CENSORED, Outcome.STALLED]
_ALIVE, _UP, _DOWN, _CENSORED, _STALLED = -1, 0, 1, 2, 3


@dataclass(frozen=True)
class LobState:
    x: int
    y: int
    t: float = 0.0

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise DomainError(f"Queue sizes must be nonnegative, got ({self.x}, {self.y}).")


@dataclass(frozen=True)
class SimEvent:
    kind: EventKind
    t: float
    state_after: LobState


@dataclass(frozen=True)
class RunConfig:
    profile: IntensityProfile
    initial: LobState
    horizon: float
    seed: int
    mode: RunMode = RunMode.FIRST_PASSAGE
    path_index: int = 0

    def __post_init__(self):
        if not self.horizon > 0:
            raise DomainError(f"Horizon must be positive, got {self.horizon}.")
        check_seed(self.seed)

    def with_initial(self, x: int, y: int) -> "RunConfig":
        return RunConfig(self.profile, LobState(x, y), self.horizon, self.seed, self.mode, self.path_index)


@dataclass(frozen=True)
class TerminalRecord:
    path_index: int
    outcome: Outcome
    t_end: float
    x: int
    y: int
    events: int

    def to_dict(self) -> Dict[str, Any]:
        return {"path": self.path_index, "outcome": self.outcome.value, "t_end": self.t_end,
                "x": self.x, "y": self.y, "events": self.events}


@dataclass
class SimulationResult:
    initial: LobState
    events: List[SimEvent]
    terminal: TerminalRecord

    def events_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(e.t, int(e.kind), e.state_after.x, e.state_after.y) for e in self.events],
            columns=["t", "kind", "x", "y"],
        )


@dataclass
class BatchResult:
    """Terminal state of every path in a batch, indexed by path."""
    path_index: np.ndarray
    outcome: np.ndarray
    t_end: np.ndarray
    x: np.ndarray
    y: np.ndarray
    events: np.ndarray

    def count(self, outcome: Outcome) -> int:
        return int(np.sum(self.outcome == _OUTCOMES.index(outcome)))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "path": self.path_index,
            "outcome": [_OUTCOMES[k].value for k in self.outcome],
            "t_end": self.t_end,
            "x": self.x,
            "y": self.y,
            "events": self.events,
        })


def _next_events(profile: IntensityProfile, x: np.ndarray, y: np.ndarray, u: np.ndarray):
    rates = profile.rates_at(imbalance_array(x, y))
    cum = np.cumsum(rates, axis=1)
    total = cum[:, -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        dt = -np.log1p(-u[:, 0]) / total
    kind = np.sum(cum <= (u[:, 1] * total)[:, None], axis=1)
    # rounding can push the pick past the last kind with a positive rate
    last_positive = 5 - np.argmax(rates[:, ::-1] > 0, axis=1)
    return dt, np.minimum(kind, last_positive), total


def _run_lanes(cfg: RunConfig, indices: np.ndarray, record: Optional[List[SimEvent]] = None) -> BatchResult:
    m = indices.size
    streams = PathStreams(cfg.seed, indices)
    x = np.full(m, cfg.initial.x, dtype=np.int64)
    y = np.full(m, cfg.initial.y, dtype=np.int64)
    t = np.zeros(m)
    events = np.zeros(m, dtype=np.int64)
    status = np.full(m, _ALIVE, dtype=np.int64)
    status[y == 0] = _UP
    status[x == 0] = _DOWN

    alive = np.flatnonzero(status == _ALIVE)
    while alive.size:
        u = streams.draw(alive)
        dt, kind, total = _next_events(cfg.profile, x[alive], y[alive], u)

        stalled = total <= 0
        status[alive[stalled]] = _STALLED

        t_new = t[alive] + dt
        over = ~stalled & (t_new > cfg.horizon)
        status[alive[over]] = _CENSORED
        t[alive[over]] = cfg.horizon

        move = ~stalled & ~over
        lanes = alive[move]
        k = kind[move]
        x[lanes] += EFFECTS[k, 0]
        y[lanes] += EFFECTS[k, 1]
        t[lanes] = t_new[move]
        events[lanes] += 1
        status[lanes[y[lanes] == 0]] = _UP
        status[lanes[x[lanes] == 0]] = _DOWN

        if record is not None and lanes.size:
            record.append(SimEvent(EventKind(int(k[0]) + 1), float(t[0]), LobState(int(x[0]), int(y[0]), float(t[0]))))
        alive = alive[status[alive] == _ALIVE]

    return BatchResult(path_index=indices, outcome=status, t_end=t, x=x, y=y, events=events)


def simulate_path(cfg: RunConfig) -> SimulationResult:
    """Simulate path ``cfg.path_index`` and keep its full event stream."""
    stream: List[SimEvent] = []
    batch = _run_lanes(cfg, np.array([cfg.path_index], dtype=np.int64), record=stream)
    terminal = TerminalRecord(
        path_index=cfg.path_index,
        outcome=_OUTCOMES[int(batch.outcome[0])],
        t_end=float(batch.t_end[0]),
        x=int(batch.x[0]),
        y=int(batch.y[0]),
        events=int(batch.events[0]),
    )
    return SimulationResult(initial=cfg.initial, events=stream, terminal=terminal)


def simulate_batch(cfg: RunConfig, paths: int, workers: int = 1, chunk: int = 8192) -> BatchResult:
    """Run paths ``0..paths-1`` in lock step; path i matches simulate_path with path_index=i."""
    if paths < 1:
        raise DomainError(f"Number of paths must be positive, got {paths}.")
    chunks = [np.arange(lo, min(lo + chunk, paths), dtype=np.int64) for lo in range(0, paths, chunk)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda idx: _run_lanes(cfg, idx), chunks))
    else:
        parts = [_run_lanes(cfg, idx) for idx in chunks]
    result = BatchResult(*(np.concatenate([getattr(p, name) for p in parts])
                           for name in ("path_index", "outcome", "t_end", "x", "y", "events")))
    logger.debug(f"Simulated {paths} paths from ({cfg.initial.x}, {cfg.initial.y}) in {len(chunks)} chunks")
    return result


def rescale_path(result: SimulationResult, n: int, points: int = 101) -> pd.DataFrame:
    """Samples of (X(nt)/sqrt(n), Y(nt)/sqrt(n)) on a uniform grid over [0, t_end/n]."""
    if n < 1:
        raise DomainError(f"Scale factor must be at least 1, got {n}.")
    times = np.array([0.0] + [e.t for e in result.events])
    xs = np.array([result.initial.x] + [e.state_after.x for e in result.events], dtype=float)
    ys = np.array([result.initial.y] + [e.state_after.y for e in result.events], dtype=float)
    grid = np.linspace(0.0, result.terminal.t_end / n, points)
    pos = np.searchsorted(times, grid * n, side="right") - 1
    root = math.sqrt(n)
    return pd.DataFrame({"t": grid, "x": xs[pos] / root, "y": ys[pos] / root})


@dataclass(frozen=True)
class FirstPassageEstimate:
    p_up: float
    stderr: float
    up: int
    down: int
    censored: int
    stalled: int

    @property
    def paths(self) -> int:
        return self.up + self.down + self.censored + self.stalled

    @property
    def completed(self) -> int:
        return self.up + self.down

    @property
    def censor_fraction(self) -> float:
        return (self.censored + self.stalled) / self.paths

    def to_dict(self) -> Dict[str, Any]:
        return {"p_up": self.p_up, "stderr": self.stderr, "up": self.up, "down": self.down,
                "censored": self.censored, "stalled": self.stalled, "censor_fraction": self.censor_fraction}


def estimate_from_batch(batch: BatchResult) -> FirstPassageEstimate:
    up, down = batch.count(Outcome.UP), batch.count(Outcome.DOWN)
    completed = up + down
    if completed == 0:
        raise InconclusiveExperimentError(f"None of {batch.outcome.size} paths resolved before the horizon.")
    p = up / completed
    return FirstPassageEstimate(
        p_up=p,
        stderr=math.sqrt(p * (1.0 - p) / completed),
        up=up,
        down=down,
        censored=batch.count(Outcome.CENSORED),
        stalled=batch.count(Outcome.STALLED),
    )


def first_passage_prob(cfg: RunConfig, paths: int, workers: int = 1) -> FirstPassageEstimate:
    if cfg.mode != RunMode.FIRST_PASSAGE:
        raise DomainError("first_passage_prob needs a first-passage run configuration.")
    estimate = estimate_from_batch(simulate_batch(cfg, paths, workers))
    if estimate.censor_fraction > 0.01:
        logger.warning(f"{estimate.censor_fraction:.1%} of paths did not resolve before the horizon")
    return estimate


@dataclass(frozen=True)
class MomentEstimate:
    """Per-unit-time moments of the queue increments over the horizon."""
    mean_x: float
    mean_y: float
    var_x: float
    var_y: float
    cov_xy: float
    stderr_mean_x: float
    stderr_mean_y: float
    absorbed: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def increment_moments(cfg: RunConfig, paths: int, workers: int = 1) -> MomentEstimate:
    return moments_from_batch(cfg, simulate_batch(cfg, paths, workers))


def moments_from_batch(cfg: RunConfig, batch: BatchResult) -> MomentEstimate:
    paths = batch.x.size
    if paths < 2:
        raise DomainError("Increment moments need at least 2 paths.")
    horizon = cfg.horizon
    dx = (batch.x - cfg.initial.x).astype(float)
    dy = (batch.y - cfg.initial.y).astype(float)
    cov = np.cov(dx, dy, ddof=1)
    absorbed = batch.count(Outcome.UP) + batch.count(Outcome.DOWN)
    if absorbed:
        logger.warning(f"{absorbed} paths were absorbed before the horizon; moments are biased")
    return MomentEstimate(
        mean_x=float(dx.mean() / horizon),
        mean_y=float(dy.mean() / horizon),
        var_x=float(cov[0, 0] / horizon),
        var_y=float(cov[1, 1] / horizon),
        cov_xy=float(cov[0, 1] / horizon),
        stderr_mean_x=float(math.sqrt(cov[0, 0] / paths) / horizon),
        stderr_mean_y=float(math.sqrt(cov[1, 1] / paths) / horizon),
        absorbed=absorbed,
    )


@dataclass
class QuoteDayConfig:
    """Layout of a synthetic quote day produced by the discrete model."""
    ticker: str = "SYN"
    date: str = "20140102"
    exchange: str = "T"
    open_seconds: float = 10 * 3600.0
    seconds_per_unit: float = 0.01
    start_bid: float = 40.55
    tick: float = 0.01
    refill_low: int = 1
    refill_high: int = 40


def simulate_quote_day(profile: IntensityProfile, events: int, seed: int,
                       layout: Optional[QuoteDayConfig] = None) -> pd.DataFrame:
    """Quote records from a long run of the discrete model.

    When a queue empties the quotes move one tick in that direction and both
    queues restart at independent uniform sizes.
    """
    layout = layout or QuoteDayConfig()
    rng = np.random.default_rng(check_seed(seed))
    uniforms = rng.random((events, 2)).tolist()
    cache: Dict[tuple, tuple] = {}

    def refill() -> int:
        return int(rng.integers(layout.refill_low, layout.refill_high + 1))

    x, y = refill(), refill()
    bid_ticks = int(round(layout.start_bid / layout.tick))
    t = 0.0
    rows = []
    for u_time, u_kind in uniforms:
        key = (x, y)
        if key not in cache:
            rates = profile.rates_at(x / (x + y))
            positive = np.flatnonzero(rates > 0)
            last = int(positive[-1]) if positive.size else 5
            cache[key] = (np.cumsum(rates).tolist(), float(rates.sum()), last)
        cum, total, last = cache[key]
        if total <= 0:
            break
        t += -math.log1p(-u_time) / total
        target = u_kind * total
        kind = next((j for j, c in enumerate(cum) if c > target), last)
        x += int(EFFECTS[kind, 0])
        y += int(EFFECTS[kind, 1])
        if x == 0:
            bid_ticks -= 1
            x, y = refill(), refill()
        elif y == 0:
            bid_ticks += 1
            x, y = refill(), refill()
        rows.append((t, bid_ticks, x, y))

    frame = pd.DataFrame(rows, columns=["t", "bid_ticks", "bid_size", "ask_size"])
    seconds = layout.open_seconds + frame["t"] * layout.seconds_per_unit
    whole = np.floor(seconds).astype(int)
    out = pd.DataFrame({
        "ticker": layout.ticker,
        "date": layout.date,
        "time": [f"{s // 3600:02d}:{(s % 3600) // 60:02d}:{s % 60:02d}" for s in whole],
        "seconds": seconds.to_numpy(),
        "bid": np.round(frame["bid_ticks"].to_numpy() * layout.tick, 10),
        "ask": np.round((frame["bid_ticks"].to_numpy() + 1) * layout.tick, 10),
        "bid_size": frame["bid_size"].to_numpy(np.int64),
        "ask_size": frame["ask_size"].to_numpy(np.int64),
        "exchange": layout.exchange,
    })
    logger.info(f"Generated {len(out)} synthetic quotes for {layout.ticker} on {layout.date}")
    return out
