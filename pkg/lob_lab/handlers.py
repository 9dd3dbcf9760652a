import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .errors import DomainError, DriftViolationError, IngestionError, LobLabError
from .estimator import (
    bucket_statistics,
    coalesce_single_sided,
    coefficients_from_data,
    correlation_table,
    drift_ratio_table,
    empirical_pup,
    exchange_volume_shares,
    filter_session,
    parse_quotes,
    stats_to_frame,
)
from .fitter import fit_hidden_liquidity, prediction_table
from .manifest import MANIFEST_NAME, ManifestRecorder
from .model import (
    CoefficientProfile,
    QuadratureControls,
    coefficients_from_intensities,
    pup_hidden,
    validate_driftless,
)
from .settings import RunSettings, load_run_settings
from .simulation import (
    LobState,
    RunConfig,
    RunMode,
    estimate_from_batch,
    moments_from_batch,
    simulate_batch,
    simulate_path,
)
from .storage import JSONStorage, OutputSet
from .ui import ConsoleUI
from .verify import EulerConfig, chain_oracle, convergence_experiment, euler_first_passage

logger = logging.getLogger(__name__)


def _write_run(ui: ConsoleUI, recorder: ManifestRecorder, outputs: OutputSet, out_dir: Path):
    outputs.commit(out_dir)
    manifest = recorder.finish(outputs.names())
    JSONStorage(out_dir / MANIFEST_NAME).save(manifest.to_dict())
    ui.display_manifest(manifest, str(out_dir))


def _report_failure(ui: ConsoleUI, command: str, error: Exception):
    ui.print_error(f"Error: {error}")
    if isinstance(error, IngestionError):
        for item in error.diagnostics:
            ui.print_error(f"  row {item['row']}: {item['reason']}")
    logger.error(f"Command '{command}' failed: {error}")


def _check_drift(ui: ConsoleUI, settings: RunSettings, strict: bool) -> dict:
    report = validate_driftless(settings.profile)
    if not report.ok:
        message = (f"Profile violates the driftless condition at {len(report.violations)} points "
                   f"(max deviation {report.max_deviation:.3g}).")
        if strict:
            raise DriftViolationError(message)
        ui.print_warning(f"Warning: {message}")
        logger.warning(message)
    return report.to_dict()


def _run_config(settings: RunSettings, path_index: int = 0) -> RunConfig:
    return RunConfig(settings.profile, LobState(settings.x, settings.y), settings.horizon, settings.seed,
                     settings.mode, path_index)


def handle_simulate(ui: ConsoleUI, config: Path, out_dir: Path, seed: Optional[int], strict: bool) -> bool:
    try:
        settings = load_run_settings(config, {"seed": seed})
        recorder = ManifestRecorder("simulate")
        recorder.seed = settings.seed
        recorder.record_config(**settings.to_dict(), strict=strict)
        recorder.record_input(config)
        if settings.knot_path:
            recorder.record_input(settings.knot_path)
        outputs = OutputSet()
        outputs.stage_json("driftless.json", _check_drift(ui, settings, strict))

        cfg = _run_config(settings)
        batch = simulate_batch(cfg, settings.paths, settings.workers)
        outputs.stage_frame("terminal.csv", batch.to_frame())
        if settings.mode == RunMode.FIRST_PASSAGE:
            estimate = estimate_from_batch(batch)
            outputs.stage_json("first_passage.json", estimate.to_dict())
            ui.print_info(f"P(up) from ({settings.x}, {settings.y}) = {estimate.p_up:.4f} +/- {estimate.stderr:.4f} "
                          f"over {estimate.completed} resolved paths")
            if estimate.censor_fraction > 0.01:
                ui.print_warning(f"Warning: {estimate.censor_fraction:.1%} of paths hit the horizon.")
        else:
            moments = moments_from_batch(cfg, batch)
            outputs.stage_json("moments.json", moments.to_dict())
            ui.print_info(f"Increment variance per unit time: bid {moments.var_x:.4f}, ask {moments.var_y:.4f}, "
                          f"covariance {moments.cov_xy:.4f}")

        if settings.spill_paths:
            frames = []
            for i in range(settings.spill_paths):
                frame = simulate_path(_run_config(settings, path_index=i)).events_frame()
                frames.append(frame.assign(path=i)[["path", "t", "kind", "x", "y"]])
            outputs.stage_frame("events.csv", pd.concat(frames, ignore_index=True))

        _write_run(ui, recorder, outputs, out_dir)
        ui.print_success(f"Simulated {settings.paths} paths.")
        logger.info(f"Simulate finished: {settings.paths} paths, mode {settings.mode.value}")
        return True
    except (LobLabError, ValueError, OSError) as e:
        _report_failure(ui, "simulate", e)
        return False


def handle_estimate(ui: ConsoleUI, quotes: Path, out_dir: Path, ticker: Optional[str], exchange: Optional[str],
                    start: str, end: str, buckets: int, skip_price_changes: bool = False) -> bool:
    try:
        recorder = ManifestRecorder("estimate")
        recorder.record_config(ticker=ticker, exchange=exchange, start=start, end=end, buckets=buckets,
                               skip_price_changes=skip_price_changes)
        recorder.record_input(quotes)
        width = 1.0 / buckets

        batch = parse_quotes(quotes)
        if batch.malformed:
            ui.print_warning(f"Warning: skipped {batch.malformed} malformed rows of {batch.total}.")
        frame = batch.frame
        if ticker:
            frame = frame[frame["ticker"] == ticker]
        shares = exchange_volume_shares(filter_session(frame, None, start, end))
        session = coalesce_single_sided(filter_session(frame, exchange, start, end))
        if session.empty:
            ui.print_warning("Warning: no quote records fall in the requested window.")
            logger.warning(f"Empty estimation window: exchange={exchange} {start}-{end}")

        stats = bucket_statistics(session, width, skip_price_changes=skip_price_changes)
        outputs = OutputSet()
        outputs.stage_frame("bucket_stats.csv", stats_to_frame(stats))
        outputs.stage_frame("drift_ratios.csv", drift_ratio_table(stats))
        outputs.stage_frame("correlations.csv", correlation_table(stats))
        outputs.stage_frame("empirical_pup.csv", empirical_pup(session, width))
        outputs.stage_frame("exchange_shares.csv", shares)
        populated = sum(1 for s in stats if np.isfinite(s.corr) and s.std_bid > 0 and s.std_ask > 0)
        if populated >= 2:
            outputs.stage_frame("coefficients.csv", coefficients_from_data(stats).to_frame())
        elif stats:
            ui.print_warning(f"Warning: only {populated} populated buckets, no coefficient knots written.")

        _write_run(ui, recorder, outputs, out_dir)
        if stats:
            ui.display_table(correlation_table(stats), "Correlation by imbalance")
        ui.print_success(f"Estimated statistics from {len(session)} records.")
        logger.info(f"Estimate finished on {len(session)} records of {batch.total}")
        return True
    except (LobLabError, ValueError, OSError) as e:
        _report_failure(ui, "estimate", e)
        return False


def handle_pup(ui: ConsoleUI, coeffs: Path, out_dir: Path, hidden: float, grid: int) -> bool:
    try:
        recorder = ManifestRecorder("pup")
        recorder.record_config(hidden=hidden, grid=grid)
        recorder.record_input(coeffs)
        profile = CoefficientProfile.read_csv(coeffs)
        curve = pup_hidden(profile, hidden, QuadratureControls(points=grid))
        report = curve.endpoint_report()

        outputs = OutputSet()
        outputs.stage_frame("pup_curve.csv", curve.to_frame())
        outputs.stage_json("pup_report.json", report)
        _write_run(ui, recorder, outputs, out_dir)
        ui.print_success(f"P(up) curve on {curve.z.size} points, quadrature error estimate {curve.error_estimate:.2e}.")
        logger.info(f"Pup finished: H={hidden}, {curve.z.size} points")
        return True
    except (LobLabError, ValueError, OSError) as e:
        _report_failure(ui, "pup", e)
        return False


def _with_midpoints(frame: pd.DataFrame) -> pd.DataFrame:
    if "midpoint" in frame.columns:
        return frame
    if {"lo", "hi"} <= set(frame.columns):
        return frame.assign(midpoint=0.5 * (frame["lo"] + frame["hi"]))
    if "imbalance" in frame.columns:
        bounds = frame["imbalance"].astype(str).str.split("-", n=1, expand=True).astype(float)
        return frame.assign(midpoint=0.5 * (bounds[0] + bounds[1]))
    raise DomainError("Empirical curve needs a 'midpoint', 'lo'/'hi' or 'imbalance' column.")


def handle_fit(ui: ConsoleUI, empirical: Path, coeffs: Path, out_dir: Path, buckets: int) -> bool:
    try:
        recorder = ManifestRecorder("fit")
        recorder.record_config(buckets=buckets)
        recorder.record_input(empirical)
        recorder.record_input(coeffs)
        try:
            observed = _with_midpoints(pd.read_csv(empirical))
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise DomainError(f"Cannot read empirical curve {empirical}: {e}") from e
        profile = CoefficientProfile.read_csv(coeffs)
        result = fit_hidden_liquidity(observed, profile)

        predictions = prediction_table(profile, result.H, 1.0 / buckets)
        merged = predictions
        if len(observed) == buckets:
            merged = predictions.assign(p_empirical=observed.sort_values("midpoint")["p_up"].to_numpy(float))
        outputs = OutputSet()
        outputs.stage_json("fit_report.json", result.to_dict())
        outputs.stage_frame("predictions.csv", merged)
        _write_run(ui, recorder, outputs, out_dir)
        ui.display_table(merged, f"Predicted P(up), H = {result.H:.4f}")
        ui.print_success(f"Fitted H = {result.H:.6f} (SSE {result.sse:.3e}).")
        logger.info(f"Fit finished: H={result.H}")
        return True
    except (LobLabError, ValueError, OSError) as e:
        _report_failure(ui, "fit", e)
        return False


def handle_verify(ui: ConsoleUI, config: Path, out_dir: Path, seed: Optional[int], strict: bool) -> bool:
    try:
        settings = load_run_settings(config, {"seed": seed})
        recorder = ManifestRecorder("verify")
        recorder.seed = settings.seed
        recorder.record_config(**settings.to_dict(), strict=strict)
        recorder.record_input(config)
        if settings.knot_path:
            recorder.record_input(settings.knot_path)
        outputs = OutputSet()
        drift = _check_drift(ui, settings, strict)

        table = convergence_experiment(settings.profile, settings.x, settings.y, settings.scales, settings.paths,
                                       seed=settings.seed, workers=settings.workers, require_driftless=strict)
        outputs.stage_frame("convergence.csv", table.to_frame())
        outputs.stage_json("verify_report.json", {"driftless": drift, "nonincreasing": table.is_nonincreasing()})

        if settings.euler_paths:
            coeffs = coefficients_from_intensities(settings.profile)
            euler = euler_first_passage(EulerConfig(coeffs, settings.x, settings.y, h=settings.euler_step,
                                                    paths=settings.euler_paths, seed=settings.seed),
                                        workers=settings.workers)
            outputs.stage_json("euler.json", euler.to_dict())
        if settings.chain_cap:
            if settings.profile.is_constant:
                oracle = chain_oracle(settings.profile, settings.x, settings.y, settings.chain_cap, settings.chain_tol)
                outputs.stage_json("chain_oracle.json", oracle.to_dict())
            else:
                ui.print_warning("Warning: chain oracle skipped, the profile is not constant.")

        _write_run(ui, recorder, outputs, out_dir)
        ui.display_table(table.to_frame(), "Discrete first passage against the diffusion limit")
        ui.print_success(f"Verified {len(table.rows)} scales.")
        logger.info(f"Verify finished over scales {settings.scales}")
        return True
    except (LobLabError, ValueError, OSError) as e:
        _report_failure(ui, "verify", e)
        return False
