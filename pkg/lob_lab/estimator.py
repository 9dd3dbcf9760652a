"""
Consolidated-quote statistics.

Pipeline: parse_quotes -> filter_session -> coalesce_single_sided ->
bucket_statistics / empirical_pup -> coefficients_from_data.

Quote data is carried in a pandas DataFrame with the canonical columns in
QUOTE_COLUMNS. Statistics never cross a (ticker, exchange, date) partition.
"""

import logging
import math
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import IO, Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from .errors import DomainError, IngestionError, InsufficientDataError, OrderingError, QuoteFormatError
from .model import CoefficientProfile, imbalance_array

logger = logging.getLogger(__name__)

EXCHANGE_CODES: Dict[str, str] = {
    "B": "NASDAQ OMX BX",
    "C": "National Stock Exchange",
    "J": "Direct Edge A Stock Exchange",
    "K": "Direct Edge X Stock Exchange",
    "M": "Chicago Stock Exchange",
    "N": "New York Stock Exchange",
    "P": "NYSE Arca SM",
    "T": "NASDAQ OMX",
    "W": "CBOE Stock Exchange",
    "X": "NASDAQ OMX PSX",
    "Y": "BATS Y-Exchange",
    "Z": "BATS Exchange",
}

QUOTE_COLUMNS = ["ticker", "date", "time", "seconds", "bid", "ask", "bid_size", "ask_size", "exchange"]
PARTITION_KEYS = ["ticker", "exchange", "date"]
BUCKET_WIDTHS = (0.05, 0.10)

_HEADER_ALIASES = {
    "ticker": "ticker", "symbol": "ticker", "sym": "ticker",
    "date": "date",
    "time": "time",
    "bid": "bid",
    "ask": "ask", "offer": "ask",
    "bidsize": "bid_size", "bidsiz": "bid_size",
    "asksize": "ask_size", "asksiz": "ask_size", "offersize": "ask_size",
    "exchange": "exchange", "ex": "exchange",
}
_TIME_PATTERN = re.compile(r"^(\d{1,2}):(\d{2}):(\d{2}(?:\.\d+)?)$")


def parse_time(value: str) -> float:
    """Seconds after midnight for an HH:MM:SS[.fff] string."""
    match = _TIME_PATTERN.match(value.strip())
    if not match:
        raise DomainError(f"Invalid time of day '{value}', expected HH:MM:SS.")
    h, m, s = int(match.group(1)), int(match.group(2)), float(match.group(3))
    if h > 23 or m > 59 or s >= 60:
        raise DomainError(f"Invalid time of day '{value}'.")
    return h * 3600 + m * 60 + s


@dataclass(frozen=True)
class QuoteRecord:
    ticker: str
    date: str
    time: str
    bid: float
    ask: float
    bid_size: int
    ask_size: int
    exchange: str

    @property
    def seconds(self) -> float:
        return parse_time(self.time)

    @property
    def mid(self) -> float:
        return 0.5 * (self.bid + self.ask)

    @classmethod
    def from_row(cls, row: Dict[str, Any]) -> "QuoteRecord":
        return cls(
            ticker=str(row["ticker"]),
            date=str(row["date"]),
            time=str(row["time"]),
            bid=float(row["bid"]),
            ask=float(row["ask"]),
            bid_size=int(row["bid_size"]),
            ask_size=int(row["ask_size"]),
            exchange=str(row["exchange"]),
        )


@dataclass
class QuoteBatch:
    frame: pd.DataFrame
    malformed: int
    total: int
    diagnostics: List[Dict[str, Any]]

    def records(self) -> List[QuoteRecord]:
        return [QuoteRecord.from_row(row) for row in self.frame.to_dict("records")]


def _canonical(name: str) -> Optional[str]:
    return _HEADER_ALIASES.get(re.sub(r"[\s_]+", "", str(name)).lower())


def parse_quotes(source: Union[str, Path, IO[str]], sep: Optional[str] = None,
                 max_malformed_fraction: float = 0.01) -> QuoteBatch:
    """Read quotes in the Ticker/Date/Time/Bid/Ask/BidSize/AskSize/Exchange layout.

    Malformed rows are dropped and counted. Ingestion fails once they exceed
    both one row and ``max_malformed_fraction`` of all rows.
    """
    try:
        raw = pd.read_csv(source, sep=sep, dtype=str, keep_default_na=False, skipinitialspace=True,
                          engine="python" if sep is None else "c")
    except pd.errors.EmptyDataError as e:
        raise QuoteFormatError(f"Quote source has no header row: {e}") from e
    except (OSError, pd.errors.ParserError) as e:
        raise QuoteFormatError(f"Cannot read quotes: {e}") from e

    rename = {col: _canonical(col) for col in raw.columns if _canonical(col)}
    raw = raw.rename(columns=rename)
    mandatory = [c for c in QUOTE_COLUMNS if c != "seconds"]
    missing = [c for c in mandatory if c not in raw.columns]
    if missing:
        raise QuoteFormatError(f"Quote header is missing mandatory columns {missing}; found {list(raw.columns)}.")
    if raw.empty:
        logger.info("Quote source holds a header but no rows")
        return QuoteBatch(frame=pd.DataFrame(columns=QUOTE_COLUMNS), malformed=0, total=0, diagnostics=[])
    raw = raw[mandatory].apply(lambda col: col.str.strip())

    total = len(raw)
    reasons = pd.Series("", index=raw.index, dtype=object)

    def flag(mask: pd.Series, reason: str):
        reasons[mask & (reasons == "")] = reason

    flag(raw["ticker"] == "", "empty ticker")
    dates = pd.to_datetime(raw["date"], format="%Y%m%d", errors="coerce")
    flag(dates.isna(), "bad date")
    seconds = raw["time"].map(lambda v: _safe_time(v))
    flag(seconds.isna(), "bad time")
    bid = pd.to_numeric(raw["bid"], errors="coerce")
    ask = pd.to_numeric(raw["ask"], errors="coerce")
    flag(~np.isfinite(bid) | ~np.isfinite(ask) | (bid < 0) | (ask < 0), "bad price")
    flag((bid > 0) & (ask > 0) & (bid > ask), "crossed quote")
    sizes = {}
    for col in ("bid_size", "ask_size"):
        values = pd.to_numeric(raw[col], errors="coerce")
        flag(~np.isfinite(values) | (values < 0) | (values != np.round(values)), f"bad {col}")
        sizes[col] = values
    flag(~raw["exchange"].str.fullmatch(r"[A-Za-z]"), "bad exchange code")

    bad = reasons != ""
    malformed = int(bad.sum())
    diagnostics = [{"row": int(i) + 2, "reason": reasons[i]} for i in raw.index[bad][:5]]
    if malformed > max(1, max_malformed_fraction * total):
        raise IngestionError(malformed, total, diagnostics)
    if malformed:
        logger.warning(f"Skipped {malformed} malformed quote rows out of {total}: {diagnostics}")

    good = ~bad
    frame = pd.DataFrame({
        "ticker": raw.loc[good, "ticker"],
        "date": raw.loc[good, "date"],
        "time": raw.loc[good, "time"],
        "seconds": seconds[good].astype(float),
        "bid": bid[good].astype(float),
        "ask": ask[good].astype(float),
        "bid_size": sizes["bid_size"][good].astype(np.int64),
        "ask_size": sizes["ask_size"][good].astype(np.int64),
        "exchange": raw.loc[good, "exchange"].str.upper(),
    }, columns=QUOTE_COLUMNS).reset_index(drop=True)
    logger.info(f"Parsed {len(frame)} quote records ({malformed} malformed)")
    return QuoteBatch(frame=frame, malformed=malformed, total=total, diagnostics=diagnostics)


def _safe_time(value: str) -> Optional[float]:
    try:
        return parse_time(value)
    except DomainError:
        return None


def filter_session(frame: pd.DataFrame, exchange: Optional[str] = None, start: str = "10:00:00",
                   end: str = "16:00:00") -> pd.DataFrame:
    """Keep one exchange's records with time in [start, end)."""
    lo, hi = parse_time(start), parse_time(end)
    if lo >= hi:
        raise DomainError(f"Session start {start} must precede end {end}.")
    keep = (frame["seconds"] >= lo) & (frame["seconds"] < hi)
    if exchange is not None:
        code = exchange.upper()
        if code not in EXCHANGE_CODES:
            raise DomainError(f"Unknown exchange code '{exchange}'; known codes: {', '.join(sorted(EXCHANGE_CODES))}.")
        keep &= frame["exchange"] == code
    return frame[keep].reset_index(drop=True)


def _partitions(frame: pd.DataFrame):
    return frame.groupby(PARTITION_KEYS, sort=False, group_keys=False)


def coalesce_single_sided(frame: pd.DataFrame) -> pd.DataFrame:
    """Average runs of consecutive records where only one queue size moves.

    Records that are already the result of a merge (``run_length`` > 1)
    are never merged again, so a second pass changes nothing.
    """
    if frame.empty:
        out = frame.copy()
        out["run_length"] = pd.Series(dtype=np.int64)
        return out
    parts = []
    for key, part in _partitions(frame):
        if np.any(np.diff(part["seconds"].to_numpy()) < 0):
            raise OrderingError(f"Records for partition {key} are not sorted by time.")
        parts.append(_coalesce_partition(part))
    return pd.concat(parts, ignore_index=True)


def _coalesce_partition(part: pd.DataFrame) -> pd.DataFrame:
    bid = part["bid"].to_numpy()
    ask = part["ask"].to_numpy()
    bs = part["bid_size"].to_numpy()
    as_ = part["ask_size"].to_numpy()
    lengths = part["run_length"].to_numpy() if "run_length" in part else np.ones(len(part), dtype=np.int64)

    runs: List[List[int]] = []
    side = None
    for k in range(len(part)):
        if runs and lengths[k] == 1 and lengths[runs[-1][0]] == 1:
            prev = runs[-1][-1]
            same_price = bid[k] == bid[prev] and ask[k] == ask[prev]
            moved_bid, moved_ask = bs[k] != bs[prev], as_[k] != as_[prev]
            if same_price and not (moved_bid and moved_ask):
                step_side = "bid" if moved_bid else "ask" if moved_ask else None
                if step_side is None or side is None or step_side == side:
                    runs[-1].append(k)
                    side = side or step_side
                    continue
        runs.append([k])
        side = None

    rows = []
    columns = list(part.columns)
    for run in runs:
        last = part.iloc[run[-1]].to_dict()
        if len(run) > 1:
            last["bid_size"] = int(np.rint(bs[run].mean()))
            last["ask_size"] = int(np.rint(as_[run].mean()))
            last["run_length"] = len(run)
        else:
            last["run_length"] = int(lengths[run[0]])
        rows.append(last)
    if "run_length" not in columns:
        columns.append("run_length")
    out = pd.DataFrame(rows, columns=columns)
    return out.astype({"bid_size": np.int64, "ask_size": np.int64, "run_length": np.int64})


def _bucket_count(width: float) -> int:
    for allowed in BUCKET_WIDTHS:
        if math.isclose(width, allowed):
            return int(round(1.0 / allowed))
    raise DomainError(f"Bucket width must be one of {BUCKET_WIDTHS}, got {width}.")


def bucket_index(z: np.ndarray, buckets: int) -> np.ndarray:
    return np.clip(np.floor(np.asarray(z) * buckets + 1e-9).astype(np.int64), 0, buckets - 1)


def bucket_label(k: int, buckets: int) -> str:
    return f"{k / buckets:.2f}-{(k + 1) / buckets:.2f}"


@dataclass(frozen=True)
class BucketStats:
    lo: float
    hi: float
    n_obs: int
    pos_bid: float
    neg_bid: float
    pos_ask: float
    neg_ask: float
    drift_bid: float
    drift_ask: float
    corr: float
    std_bid: float
    std_ask: float
    n_bid_changes: int
    n_ask_changes: int
    p_up: float = float("nan")
    n_pup: int = 0

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def label(self) -> str:
        return f"{self.lo:.2f}-{self.hi:.2f}"

    def to_dict(self) -> Dict[str, Any]:
        return {"imbalance": self.label, **asdict(self)}


def _drift(pos: float, neg: float) -> float:
    return pos / (pos + neg) if pos + neg > 0 else float("nan")


def _size_pairs(frame: pd.DataFrame, skip_price_changes: bool) -> pd.DataFrame:
    work = frame.reset_index(drop=True)
    work["seq"] = np.arange(len(work))
    prev = _partitions(work)[["bid", "ask", "bid_size", "ask_size"]].shift(1)
    has_prev = prev["bid_size"].notna()
    if skip_price_changes:
        has_prev &= (prev["bid"] == work["bid"]) & (prev["ask"] == work["ask"])
    pairs = work.loc[has_prev, PARTITION_KEYS + ["seq"]].copy()
    pairs["z"] = imbalance_array(prev.loc[has_prev, "bid_size"].to_numpy(float), prev.loc[has_prev, "ask_size"].to_numpy(float))
    pairs["d_bid"] = work.loc[has_prev, "bid_size"].to_numpy(float) - prev.loc[has_prev, "bid_size"].to_numpy(float)
    pairs["d_ask"] = work.loc[has_prev, "ask_size"].to_numpy(float) - prev.loc[has_prev, "ask_size"].to_numpy(float)
    return pairs


def bucket_statistics(frame: pd.DataFrame, bucket_width: float = 0.05,
                      skip_price_changes: bool = False) -> List[BucketStats]:
    """Per-bucket size-change statistics of consecutive record pairs.

    A pair is bucketed by the imbalance of its earlier record. With
    ``skip_price_changes`` pairs straddling a quote price change are dropped.
    """
    buckets = _bucket_count(bucket_width)
    if frame.empty:
        return []
    pairs = _size_pairs(frame, skip_price_changes)
    if pairs.empty:
        return []
    pairs["bucket"] = bucket_index(pairs["z"].to_numpy(), buckets)
    pairs = pairs.sort_values(["bucket", *PARTITION_KEYS, "seq"], kind="mergesort")
    pup = empirical_pup(frame, bucket_width).set_index("bucket")

    stats = []
    grouped = {k: g for k, g in pairs.groupby("bucket", sort=True)}
    for k in range(buckets):
        group = grouped.get(k)
        db = group["d_bid"].to_numpy() if group is not None else np.empty(0)
        da = group["d_ask"].to_numpy() if group is not None else np.empty(0)
        n = db.size
        std_b = float(np.std(db, ddof=1)) if n >= 2 else float("nan")
        std_a = float(np.std(da, ddof=1)) if n >= 2 else float("nan")
        corr = float("nan")
        if n >= 2 and std_b > 0 and std_a > 0:
            corr = float(np.clip(np.corrcoef(db, da)[0, 1], -1.0, 1.0))
        pos_b, neg_b = float(db[db > 0].sum()), float(-db[db < 0].sum())
        pos_a, neg_a = float(da[da > 0].sum()), float(-da[da < 0].sum())
        stats.append(BucketStats(
            lo=k / buckets,
            hi=(k + 1) / buckets,
            n_obs=int(n),
            pos_bid=pos_b,
            neg_bid=neg_b,
            pos_ask=pos_a,
            neg_ask=neg_a,
            drift_bid=_drift(pos_b, neg_b),
            drift_ask=_drift(pos_a, neg_a),
            corr=corr,
            std_bid=std_b,
            std_ask=std_a,
            n_bid_changes=int(np.count_nonzero(db)),
            n_ask_changes=int(np.count_nonzero(da)),
            p_up=float(pup.at[k, "p_up"]),
            n_pup=int(pup.at[k, "count"]),
        ))
    logger.info(f"Bucketed {len(pairs)} size-change pairs into {buckets} imbalance buckets")
    return stats


def empirical_pup(frame: pd.DataFrame, bucket_width: float = 0.05) -> pd.DataFrame:
    """Per-bucket share of records whose next mid-price change is upward.

    Records after the last mid-price change of their partition are left out.
    """
    frame = frame.reset_index(drop=True)
    buckets = _bucket_count(bucket_width)
    outcome = pd.Series(np.nan, index=frame.index)
    for _, part in _partitions(frame):
        mid = np.round(0.5 * (part["bid"].to_numpy() + part["ask"].to_numpy()), 9)
        if mid.size == 0:
            continue
        run = np.concatenate([[0], np.cumsum(mid[1:] != mid[:-1])])
        run_mid = mid[np.r_[0, np.flatnonzero(np.diff(run)) + 1]]
        next_mid = np.append(run_mid[1:], np.nan)[run]
        with np.errstate(invalid="ignore"):
            result = np.where(np.isnan(next_mid), np.nan, (next_mid > mid).astype(float))
        outcome.loc[part.index] = result

    known = outcome.notna().to_numpy()
    z = imbalance_array(frame["bid_size"].to_numpy(float), frame["ask_size"].to_numpy(float))
    index = bucket_index(z, buckets)
    rows = []
    for k in range(buckets):
        sel = known & (index == k)
        count = int(sel.sum())
        p = float(outcome.to_numpy()[sel].mean()) if count else float("nan")
        rows.append((k, bucket_label(k, buckets), k / buckets, (k + 1) / buckets, (k + 0.5) / buckets, p, count))
    return pd.DataFrame(rows, columns=["bucket", "imbalance", "lo", "hi", "midpoint", "p_up", "count"])


def exchange_volume_shares(frame: pd.DataFrame, by: str = "size") -> pd.DataFrame:
    """Share of quoted size (or of record count) per exchange code."""
    if by not in ("size", "count"):
        raise DomainError(f"Share basis must be 'size' or 'count', got '{by}'.")
    if frame.empty:
        return pd.DataFrame(columns=["exchange", "name", "share"])
    if by == "size":
        weight = (frame["bid_size"] + frame["ask_size"]).astype(float)
    else:
        weight = pd.Series(1.0, index=frame.index)
    totals = weight.groupby(frame["exchange"]).sum()
    if totals.sum() <= 0:
        totals = frame.groupby("exchange").size().astype(float)
    shares = (totals / totals.sum()).sort_values(ascending=False, kind="mergesort")
    return pd.DataFrame({
        "exchange": shares.index,
        "name": [EXCHANGE_CODES.get(code, "unknown") for code in shares.index],
        "share": shares.to_numpy(),
    }).reset_index(drop=True)


def coefficients_from_data(stats: List[BucketStats], dt_model: float = 1.0) -> CoefficientProfile:
    """Knot at every bucket midpoint; buckets without estimates are interpolated."""
    if dt_model <= 0:
        raise DomainError(f"Model time step must be positive, got {dt_model}.")
    if not stats:
        raise InsufficientDataError("No bucket statistics to build a profile from.")
    mids = np.array([s.midpoint for s in stats])
    corr = np.array([s.corr for s in stats])
    std_b = np.array([s.std_bid for s in stats])
    std_a = np.array([s.std_ask for s in stats])
    ok = np.isfinite(corr) & np.isfinite(std_b) & np.isfinite(std_a) & (std_b > 0) & (std_a > 0)
    if ok.sum() < 2:
        raise InsufficientDataError(f"Only {int(ok.sum())} populated buckets; at least 2 are needed.")
    if not ok.all():
        logger.info(f"Interpolating coefficients for {int((~ok).sum())} empty buckets")

    def fill(values: np.ndarray) -> np.ndarray:
        return np.where(ok, values, np.interp(mids, mids[ok], values[ok]))

    root = math.sqrt(dt_model)
    return CoefficientProfile(
        z=mids,
        sigma_b=fill(std_b) / root,
        sigma_a=fill(std_a) / root,
        rho=np.clip(fill(corr), -1.0, 1.0),
    )


STATS_COLUMNS = ["imbalance", "lo", "hi", "n_obs", "pos_bid", "neg_bid", "pos_ask", "neg_ask", "drift_bid",
                 "drift_ask", "corr", "std_bid", "std_ask", "n_bid_changes", "n_ask_changes", "p_up", "n_pup"]


def stats_to_frame(stats: List[BucketStats]) -> pd.DataFrame:
    return pd.DataFrame([s.to_dict() for s in stats], columns=STATS_COLUMNS)


def stats_from_frame(frame: pd.DataFrame) -> List[BucketStats]:
    fields = [c for c in STATS_COLUMNS if c != "imbalance"]
    missing = [c for c in ("lo", "hi", "corr", "std_bid", "std_ask") if c not in frame.columns]
    if missing:
        raise QuoteFormatError(f"Bucket statistics table is missing columns {missing}.")
    defaults = {"n_obs": 0, "n_bid_changes": 0, "n_ask_changes": 0, "n_pup": 0}
    out = []
    for row in frame.to_dict("records"):
        values = {}
        for name in fields:
            raw = row.get(name, defaults.get(name, float("nan")))
            values[name] = int(raw) if name in defaults and not pd.isna(raw) else float(raw)
        out.append(BucketStats(**values))
    return out


def drift_ratio_table(stats: List[BucketStats]) -> pd.DataFrame:
    return pd.DataFrame({
        "imbalance": [s.label for s in stats],
        "bid": [s.drift_bid for s in stats],
        "ask": [s.drift_ask for s in stats],
        "pos_bid": [s.pos_bid for s in stats],
        "neg_bid": [s.neg_bid for s in stats],
        "pos_ask": [s.pos_ask for s in stats],
        "neg_ask": [s.neg_ask for s in stats],
    })


def correlation_table(stats: List[BucketStats]) -> pd.DataFrame:
    return pd.DataFrame({
        "imbalance": [s.label for s in stats],
        "corr": [s.corr for s in stats],
        "std_bid": [s.std_bid for s in stats],
        "std_ask": [s.std_ask for s in stats],
        "n_obs": [s.n_obs for s in stats],
    })
