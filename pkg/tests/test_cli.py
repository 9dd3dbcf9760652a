import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from typer.testing import CliRunner

from lob_lab.main import app
from lob_lab.manifest import RunManifest
from lob_lab.model import CoefficientProfile

runner = CliRunner()

SWAP_CONFIG = """
[profile]
rates = 0,0,0,0,1,1

[run]
x = 2
y = 3
paths = 4000
seed = 21
"""


def _invoke(*args):
    return runner.invoke(app, [str(a) for a in args])


def _read_json(path):
    return json.loads(path.read_text())


def _write_coeffs(path, coeffs: CoefficientProfile):
    coeffs.to_frame().to_csv(path, index=False)
    return path


def test_simulate_swap_only_reports_imbalance(tmp_path, write_config):
    out = tmp_path / "out"
    result = _invoke("simulate", "--config", write_config(SWAP_CONFIG), "--out-dir", out)
    assert result.exit_code == 0, result.output
    estimate = _read_json(out / "first_passage.json")
    assert estimate["p_up"] == pytest.approx(0.4, abs=4 * estimate["stderr"])
    manifest = RunManifest.load(out / "manifest.json")
    assert manifest.command == "simulate"
    assert manifest.seed == 21
    assert "terminal.csv" in manifest.outputs
    assert _read_json(out / "driftless.json")["ok"] is True


def test_simulate_is_reproducible(tmp_path, write_config):
    config = write_config(SWAP_CONFIG)
    for name in ("a", "b"):
        assert _invoke("simulate", "-c", config, "-o", tmp_path / name).exit_code == 0
    assert (tmp_path / "a" / "terminal.csv").read_bytes() == (tmp_path / "b" / "terminal.csv").read_bytes()
    first = RunManifest.load(tmp_path / "a" / "manifest.json")
    second = RunManifest.load(tmp_path / "b" / "manifest.json")
    assert first.reproducibility_key() == second.reproducibility_key()


def test_seed_flag_overrides_config(tmp_path, write_config):
    out = tmp_path / "out"
    assert _invoke("simulate", "-c", write_config(SWAP_CONFIG), "-o", out, "--seed", 5).exit_code == 0
    assert RunManifest.load(out / "manifest.json").seed == 5


def test_simulate_spills_event_streams(tmp_path, write_config):
    out = tmp_path / "out"
    config = write_config(SWAP_CONFIG.replace("paths = 4000", "paths = 50\nspill_paths = 3"))
    assert _invoke("simulate", "-c", config, "-o", out).exit_code == 0
    events = pd.read_csv(out / "events.csv")
    assert list(events.columns) == ["path", "t", "kind", "x", "y"]
    assert sorted(events["path"].unique()) == [0, 1, 2]


def test_missing_knot_file_fails_without_outputs(tmp_path, write_config):
    out = tmp_path / "out"
    result = _invoke("simulate", "-c", write_config("[profile]\nknots = nowhere.csv\n"), "-o", out)
    assert result.exit_code == 1
    assert not out.exists()


def test_strict_verify_refuses_drifting_profile(tmp_path, write_config):
    out = tmp_path / "out"
    config = write_config("[profile]\nrates = 2,1,1,1,1,1\n[run]\npaths = 100\n[verify]\nscales = 1\n")
    assert _invoke("verify", "-c", config, "-o", out, "--strict").exit_code == 1
    assert not out.exists()


def test_verify_swap_only_with_chain_oracle(tmp_path, write_config):
    out = tmp_path / "out"
    config = write_config(SWAP_CONFIG.replace("paths = 4000", "paths = 2000") + "\n[verify]\nscales = 1,2\nchain_cap = 16\n")
    result = _invoke("verify", "-c", config, "-o", out)
    assert result.exit_code == 0, result.output
    table = pd.read_csv(out / "convergence.csv")
    assert table["n"].tolist() == [1, 2]
    np.testing.assert_allclose(table["analytic"], 0.4, atol=1e-9)
    assert _read_json(out / "chain_oracle.json")["p_up"] == pytest.approx(0.4, abs=1e-9)
    assert _read_json(out / "verify_report.json")["driftless"]["ok"] is True


def test_pup_without_hidden_liquidity_is_identity(tmp_path):
    coeffs = _write_coeffs(tmp_path / "coeffs.csv", CoefficientProfile.constant(1.0, 1.0, -1.0))
    out = tmp_path / "out"
    assert _invoke("pup", "--coeffs", coeffs, "-o", out, "--grid", 11).exit_code == 0
    curve = pd.read_csv(out / "pup_curve.csv")
    np.testing.assert_allclose(curve["p"], curve["z"], atol=1e-9)
    report = _read_json(out / "pup_report.json")
    assert report["p_at_0_ok"] and report["p_at_1_ok"]


def test_pup_half_hidden_liquidity_is_flat(tmp_path):
    coeffs = _write_coeffs(tmp_path / "coeffs.csv", CoefficientProfile.constant(1.0, 1.0, -0.4))
    out = tmp_path / "out"
    assert _invoke("pup", "--coeffs", coeffs, "-o", out, "-H", 0.5).exit_code == 0
    np.testing.assert_allclose(pd.read_csv(out / "pup_curve.csv")["p"], 0.5, atol=1e-9)


def test_pup_rejects_hidden_level_above_half(tmp_path):
    coeffs = _write_coeffs(tmp_path / "coeffs.csv", CoefficientProfile.constant(1.0, 1.0, -0.4))
    assert _invoke("pup", "--coeffs", coeffs, "-o", tmp_path / "out", "-H", 0.7).exit_code == 1


def test_fit_recovers_planted_level(tmp_path):
    coeffs = _write_coeffs(tmp_path / "coeffs.csv", CoefficientProfile.constant(1.0, 1.0, -1.0))
    z = (np.arange(20) + 0.5) / 20
    empirical = tmp_path / "empirical.csv"
    pd.DataFrame({"midpoint": z, "p_up": 0.1 + 0.8 * z}).to_csv(empirical, index=False)
    out = tmp_path / "out"
    result = _invoke("fit", "--empirical", empirical, "--coeffs", coeffs, "-o", out)
    assert result.exit_code == 0, result.output
    assert _read_json(out / "fit_report.json")["H"] == pytest.approx(0.1, abs=1e-9)
    predictions = pd.read_csv(out / "predictions.csv")
    np.testing.assert_allclose(predictions["p_pred"], predictions["p_empirical"], atol=1e-9)


def test_fit_unidentifiable_curve_fails(tmp_path):
    coeffs = _write_coeffs(tmp_path / "coeffs.csv", CoefficientProfile.constant(1.0, 1.0, -0.4))
    empirical = tmp_path / "empirical.csv"
    pd.DataFrame({"midpoint": [0.5, 0.5], "p_up": [0.4, 0.6]}).to_csv(empirical, index=False)
    out = tmp_path / "out"
    assert _invoke("fit", "--empirical", empirical, "--coeffs", coeffs, "-o", out).exit_code == 1
    assert not out.exists()


def test_fit_published_correlation_and_empirical_tables(tmp_path, fixtures_dir, jpm_coefficients):
    coeffs = _write_coeffs(tmp_path / "coeffs.csv", jpm_coefficients)
    out = tmp_path / "out"
    result = _invoke("fit", "--empirical", fixtures_dir / "table5_bac_e.csv", "--coeffs", coeffs, "-o", out)
    assert result.exit_code == 0, result.output
    report = _read_json(out / "fit_report.json")
    assert 0.0 <= report["H"] <= 0.5
    assert report["n_points"] == 20
    assert len(pd.read_csv(out / "predictions.csv")) == 20


def test_estimate_table1_on_one_exchange(tmp_path, fixtures_dir):
    out = tmp_path / "out"
    result = _invoke("estimate", "-q", fixtures_dir / "table1_quotes.csv", "-o", out, "-e", "T", "--buckets", "10")
    assert result.exit_code == 0, result.output
    assert "corr" in pd.read_csv(out / "bucket_stats.csv").columns
    shares = pd.read_csv(out / "exchange_shares.csv")
    assert shares["share"].sum() == pytest.approx(1.0)
    assert set(shares["exchange"]) == {"N", "P", "T"}
    manifest = RunManifest.load(out / "manifest.json")
    assert list(manifest.inputs) == ["table1_quotes.csv"]


def test_estimate_empty_window_succeeds(tmp_path, fixtures_dir):
    out = tmp_path / "out"
    result = _invoke("estimate", "-q", fixtures_dir / "table1_quotes.csv", "-o", out,
                     "--start", "15:00:00", "--end", "15:00:01")
    assert result.exit_code == 0, result.output
    assert (out / "manifest.json").exists()
    assert not (out / "coefficients.csv").exists()


def test_estimate_missing_file_fails(tmp_path):
    assert _invoke("estimate", "-q", tmp_path / "absent.csv", "-o", tmp_path / "out").exit_code == 1


def test_unknown_log_level_is_a_usage_error(tmp_path):
    coeffs = _write_coeffs(tmp_path / "coeffs.csv", CoefficientProfile.constant(1.0, 1.0, -1.0))
    result = _invoke("--log-level", "LOUD", "pup", "--coeffs", coeffs, "-o", tmp_path / "out")
    assert result.exit_code == 2
    assert isinstance(result.exception, SystemExit)
    assert not (tmp_path / "out").exists()


def test_log_level_is_case_insensitive(tmp_path):
    coeffs = _write_coeffs(tmp_path / "coeffs.csv", CoefficientProfile.constant(1.0, 1.0, -1.0))
    result = _invoke("--log-level", "warning", "pup", "--coeffs", coeffs, "-o", tmp_path / "out", "--grid", 11)
    assert result.exit_code == 0, result.output


def test_packaging_metadata_describes_this_project():
    root = Path(__file__).resolve().parents[1]
    setup_text = (root / "setup.py").read_text()
    assert "lob_lab=lob_lab.main:main" in setup_text
    assert "author" not in setup_text
    assert "your-username" not in (root / "README.md").read_text()
