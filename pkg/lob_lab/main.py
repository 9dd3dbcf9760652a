import logging
import os
from enum import Enum
from pathlib import Path
from typing import Annotated, Optional

import typer
from dotenv import load_dotenv

from . import handlers
from .ui import ConsoleUI

load_dotenv()

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _level_name(value: Optional[str], default: str = "INFO") -> str:
    name = (value or default).upper()
    return name if name in LOG_LEVELS else default


# Configure logging
logging.basicConfig(level=_level_name(os.getenv("LOB_LAB_LOG_LEVEL")),
                    format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


ui = ConsoleUI()

app = typer.Typer(help="Level-1 order book laboratory: simulate, estimate, compute, fit and verify.")


class Buckets(str, Enum):
    ten = "10"
    twenty = "20"


OutDir = Annotated[Path, typer.Option("--out-dir", "-o", envvar="LOB_LAB_OUT_DIR", help="Directory for outputs and the run manifest")]


def _exit_on_failure(ok: bool):
    if not ok:
        raise typer.Exit(code=1)


@app.callback()
def configure(
    log_level: Annotated[Optional[str], typer.Option("--log-level", help="Logging level (DEBUG, INFO, WARNING, ERROR)")] = None,
):
    "Level-1 order book laboratory"
    if log_level:
        if log_level.upper() not in LOG_LEVELS:
            raise typer.BadParameter(f"{log_level!r} is not one of {', '.join(LOG_LEVELS)}", param_hint="--log-level")
        logging.getLogger().setLevel(log_level.upper())


@app.command(name="simulate")
def simulate_command(
    config: Annotated[Path, typer.Option("--config", "-c", help="INI run config with [profile] and [run] sections")],
    out_dir: OutDir = Path("out"),
    seed: Annotated[Optional[int], typer.Option("--seed", help="Override the config seed")] = None,
    strict: Annotated[bool, typer.Option("--strict", help="Refuse profiles that violate the driftless condition")] = False,
):
    "Simulate the discrete queue model"
    _exit_on_failure(handlers.handle_simulate(ui, config, out_dir, seed, strict))


@app.command(name="estimate")
def estimate_command(
    quotes: Annotated[Path, typer.Option("--quotes", "-q", help="Consolidated quote file")],
    out_dir: OutDir = Path("out"),
    ticker: Annotated[Optional[str], typer.Option("--ticker", help="Keep only this ticker")] = None,
    exchange: Annotated[Optional[str], typer.Option("--exchange", "-e", help="Single-letter exchange code")] = None,
    start: Annotated[str, typer.Option("--start", help="Session start, HH:MM:SS")] = "10:00:00",
    end: Annotated[str, typer.Option("--end", help="Session end (exclusive), HH:MM:SS")] = "16:00:00",
    buckets: Annotated[Buckets, typer.Option("--buckets", help="Number of imbalance buckets")] = Buckets.twenty,
    skip_price_changes: Annotated[bool, typer.Option("--skip-price-changes", help="Ignore size changes across a quote move")] = False,
):
    "Estimate bucketed queue statistics from quote data"
    _exit_on_failure(handlers.handle_estimate(ui, quotes, out_dir, ticker, exchange, start, end, int(buckets.value),
                                              skip_price_changes))


@app.command(name="pup")
def pup_command(
    coeffs: Annotated[Path, typer.Option("--coeffs", help="Coefficient knot CSV (z, sigma_b, sigma_a, rho)")],
    out_dir: OutDir = Path("out"),
    hidden: Annotated[float, typer.Option("--hidden", "-H", help="Hidden liquidity level in [0, 0.5]")] = 0.0,
    grid: Annotated[int, typer.Option("--grid", help="Number of evaluation points on [0, 1]")] = 101,
):
    "Compute the probability of an upward price move"
    _exit_on_failure(handlers.handle_pup(ui, coeffs, out_dir, hidden, grid))


@app.command(name="fit")
def fit_command(
    empirical: Annotated[Path, typer.Option("--empirical", help="Empirical P(up) per imbalance bucket")],
    coeffs: Annotated[Path, typer.Option("--coeffs", help="Coefficient knot CSV (z, sigma_b, sigma_a, rho)")],
    out_dir: OutDir = Path("out"),
    buckets: Annotated[Buckets, typer.Option("--buckets", help="Number of imbalance buckets in the prediction table")] = Buckets.twenty,
):
    "Fit the hidden liquidity level to an empirical curve"
    _exit_on_failure(handlers.handle_fit(ui, empirical, coeffs, out_dir, int(buckets.value)))


@app.command(name="verify")
def verify_command(
    config: Annotated[Path, typer.Option("--config", "-c", help="INI run config with [profile], [run] and [verify] sections")],
    out_dir: OutDir = Path("out"),
    seed: Annotated[Optional[int], typer.Option("--seed", help="Override the config seed")] = None,
    strict: Annotated[bool, typer.Option("--strict", help="Refuse profiles that violate the driftless condition")] = False,
):
    "Check discrete first passage against the diffusion limit"
    _exit_on_failure(handlers.handle_verify(ui, config, out_dir, seed, strict))


def main():
    app()

if __name__ == "__main__":
    main()
