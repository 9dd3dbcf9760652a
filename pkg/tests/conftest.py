from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from lob_lab.model import CoefficientProfile, IntensityProfile

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def swap_only() -> IntensityProfile:
    return IntensityProfile.constant([0, 0, 0, 0, 1, 1])


@pytest.fixture
def all_ones() -> IntensityProfile:
    return IntensityProfile.constant([1, 1, 1, 1, 1, 1])


@pytest.fixture
def knotted_profile() -> IntensityProfile:
    """Driftless profile whose swap rates peak at balanced queues."""
    z = np.array([0.0, 0.5, 1.0])
    swaps = np.array([0.5, 1.5, 0.5])
    rates = np.column_stack([np.ones(3), np.ones(3), np.ones(3), np.ones(3), swaps, swaps])
    return IntensityProfile(z=z, rates=rates)


@pytest.fixture
def jpm_coefficients(fixtures_dir) -> CoefficientProfile:
    table = pd.read_csv(fixtures_dir / "table4_jpm_n_corr.csv")
    mids = 0.5 * (table["lo"] + table["hi"])
    ones = np.ones(len(table))
    return CoefficientProfile(z=mids, sigma_b=ones, sigma_a=ones, rho=table["corr"].to_numpy())


@pytest.fixture
def write_config(tmp_path):
    def write(text: str, name: str = "run.ini") -> Path:
        path = tmp_path / name
        path.write_text(text)
        return path
    return write


@pytest.fixture
def planted_correlation_day() -> pd.DataFrame:
    """Quotes at one price whose size changes have correlation -0.34 near z=0.225."""
    rng = np.random.default_rng(34)
    records = 200_000
    noise = rng.multivariate_normal([0.0, 0.0], 400.0 * np.array([[1.0, -0.34], [-0.34, 1.0]]), size=records)
    seconds = 36000.0 + 0.01 * np.arange(records)
    whole = np.floor(seconds).astype(int)
    return pd.DataFrame({
        "ticker": "PLT",
        "date": "20140102",
        "time": [f"{s // 3600:02d}:{(s % 3600) // 60:02d}:{s % 60:02d}" for s in whole],
        "seconds": seconds,
        "bid": 40.55,
        "ask": 40.56,
        "bid_size": 2250 + np.rint(noise[:, 0]).astype(np.int64),
        "ask_size": 7750 + np.rint(noise[:, 1]).astype(np.int64),
        "exchange": "N",
    })
