import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import norm

from lob_lab.errors import DomainError
from lob_lab.model import (
    DriftedBmSpec,
    WedgeQuadrature,
    pup_closed_form_corr,
    pup_closed_form_imbalance,
    pup_drifted_bm,
)


def test_independent_queues_closed_form():
    assert pup_closed_form_corr(1, 3, 0.0) == pytest.approx(2.0 / math.pi * math.atan(1.0 / 3.0), abs=1e-12)


def test_balanced_queues_are_a_coin_flip():
    for rho in (-0.9, -0.3, 0.0, 0.5):
        assert pup_closed_form_corr(4, 4, rho) == pytest.approx(0.5)


def test_perfect_anticorrelation_is_imbalance():
    assert pup_closed_form_corr(2, 3, -1.0) == pytest.approx(0.4, abs=1e-12)
    np.testing.assert_allclose(pup_closed_form_imbalance([0.0, 0.3, 1.0], -1.0), [0.0, 0.3, 1.0], atol=1e-12)


def test_imbalance_form_matches_queue_form():
    for x, y in [(1, 3), (5, 2), (7, 7)]:
        assert pup_closed_form_imbalance(x / (x + y), -0.4) == pytest.approx(pup_closed_form_corr(x, y, -0.4))


def test_closed_form_domain():
    with pytest.raises(DomainError):
        pup_closed_form_corr(0, 3, 0.0)
    with pytest.raises(DomainError):
        pup_closed_form_corr(1, 3, 1.0)
    with pytest.raises(DomainError):
        pup_closed_form_imbalance([1.2], 0.0)


@pytest.mark.parametrize("x, y, rho", [
    (1.0, 3.0, 0.0), (2.0, 1.0, -0.5), (1.0, 1.0, 0.4), (1.0, 3.0, -0.9), (2.0, 1.0, 0.5),
])
def test_zero_drift_wedge_is_angle_ratio(x, y, rho):
    spec = DriftedBmSpec(mu_b=0.0, mu_a=0.0, sigma_b=1.0, sigma_a=1.0, rho=rho, x=x, y=y)
    assert pup_drifted_bm(spec) == pytest.approx(pup_closed_form_corr(x, y, rho), abs=1e-10)


def test_wedge_geometry_for_independent_queues():
    spec = DriftedBmSpec(mu_b=0.0, mu_a=0.0, sigma_b=1.0, sigma_a=1.0, rho=0.0, x=1.0, y=3.0)
    assert spec.alpha == pytest.approx(math.pi / 2)
    assert spec.r0 == pytest.approx(math.sqrt(10.0))
    assert spec.start == pytest.approx((3.0, 1.0))


def _independent_drifted_pup(x, y, drift):
    """P(ask queue hits 0 first) for independent unit-variance queues with equal drift."""
    def hit_density(t, start):
        return start / math.sqrt(2 * math.pi * t**3) * math.exp(-((start + drift * t) ** 2) / (2 * t))

    def survival(t, start):
        root = math.sqrt(t)
        return norm.cdf((start + drift * t) / root) - math.exp(-2 * drift * start) * norm.cdf((-start + drift * t) / root)

    value, _ = integrate.quad(lambda t: hit_density(t, y) * survival(t, x), 0.0, np.inf, limit=400)
    return value


def test_drifted_wedge_matches_independent_first_passage():
    spec = DriftedBmSpec(mu_b=-0.2, mu_a=-0.2, sigma_b=1.0, sigma_a=1.0, rho=0.0, x=1.0, y=3.0)
    assert pup_drifted_bm(spec) == pytest.approx(_independent_drifted_pup(1.0, 3.0, -0.2), abs=2e-3)


def test_symmetric_drift_and_start_give_one_half():
    spec = DriftedBmSpec(mu_b=-0.3, mu_a=-0.3, sigma_b=1.0, sigma_a=1.0, rho=-0.5, x=2.0, y=2.0)
    assert pup_drifted_bm(spec) == pytest.approx(0.5, abs=2e-3)


def test_drift_towards_the_ask_raises_probability():
    base = DriftedBmSpec(mu_b=0.0, mu_a=-0.3, sigma_b=1.0, sigma_a=1.0, rho=-0.3, x=2.0, y=2.0)
    assert pup_drifted_bm(base) > 0.5


def test_wedge_inputs_validated():
    with pytest.raises(DomainError):
        DriftedBmSpec(mu_b=0.0, mu_a=0.0, sigma_b=1.0, sigma_a=1.0, rho=-1.0, x=1.0, y=1.0)
    with pytest.raises(DomainError):
        WedgeQuadrature(t_nodes=4)
