import numpy as np
import pandas as pd
import pytest

from lob_lab.errors import DegenerateProfileError, DomainError, ProfileError, SingularCoefficientError
from lob_lab.model import (
    CoefficientProfile,
    IntensityProfile,
    PupCurve,
    QuadratureControls,
    coefficients_from_intensities,
    imbalance,
    imbalance_array,
    mu_nu,
    pup_closed_form_imbalance,
    pup_general,
    pup_hidden,
    validate_driftless,
)


def test_imbalance_basic_values():
    assert imbalance(1, 3) == pytest.approx(0.25)
    assert imbalance(0, 5) == 0.0
    assert imbalance(0, 0) == 0.5
    np.testing.assert_allclose(imbalance_array([1, 2, 0], [1, 2, 4]), [0.5, 0.5, 0.0])


def test_imbalance_rejects_negative_queues():
    with pytest.raises(DomainError):
        imbalance(-1, 2)


def test_intensity_profile_validation():
    with pytest.raises(ProfileError):
        IntensityProfile(z=[0.0, 0.5], rates=np.ones((3, 6)))
    with pytest.raises(ProfileError):
        IntensityProfile(z=[0.5, 0.2], rates=np.ones((2, 6)))
    with pytest.raises(ProfileError):
        IntensityProfile.constant([1, 1, 1, -1, 1, 1])


def test_intensity_profile_does_not_freeze_caller_arrays():
    rates = np.ones((2, 6))
    profile = IntensityProfile(z=[0.0, 1.0], rates=rates)
    rates[0, 0] = 5.0
    assert profile.rates[0, 0] == 1.0
    with pytest.raises(ValueError):
        profile.rates[0, 0] = 2.0


def test_rates_interpolate_between_knots(knotted_profile):
    lam = knotted_profile.rates_at([0.25, 0.5])
    assert lam.shape == (2, 6)
    assert lam[0, 4] == pytest.approx(1.0)
    assert lam[1, 5] == pytest.approx(1.5)


def test_all_ones_maps_to_known_coefficients(all_ones):
    coeffs = coefficients_from_intensities(all_ones)
    sb, sa, rho = coeffs.at(0.3)
    assert sb == pytest.approx(2.0)
    assert sa == pytest.approx(2.0)
    assert rho == pytest.approx(-0.5)


def test_swap_only_maps_to_perfect_anticorrelation(swap_only):
    coeffs = coefficients_from_intensities(swap_only)
    assert coeffs.at(0.7)[2] == pytest.approx(-1.0)


def test_one_sided_profile_is_degenerate():
    with pytest.raises(DegenerateProfileError):
        coefficients_from_intensities(IntensityProfile.constant([1, 1, 0, 0, 0, 0]))


def test_validate_driftless(all_ones, knotted_profile):
    assert validate_driftless(all_ones).ok
    assert validate_driftless(knotted_profile).ok
    report = validate_driftless(IntensityProfile.constant([2, 1, 1, 1, 1, 1]))
    assert not report.ok
    assert report.max_deviation == pytest.approx(1.0)
    assert report.violations


def test_coefficient_profile_rejects_bad_values():
    with pytest.raises(ProfileError):
        CoefficientProfile(z=[0, 1], sigma_b=[1, 0], sigma_a=[1, 1], rho=[0, 0])
    with pytest.raises(ProfileError):
        CoefficientProfile(z=[0, 1], sigma_b=[1, 1], sigma_a=[1, 1], rho=[0, -1.5])


def test_knot_csv_round_trip(tmp_path, knotted_profile):
    path = tmp_path / "profile.csv"
    knotted_profile.to_frame().to_csv(path, index=False)
    loaded = IntensityProfile.read_csv(path)
    np.testing.assert_array_equal(loaded.z, knotted_profile.z)
    np.testing.assert_array_equal(loaded.rates, knotted_profile.rates)


def test_knot_csv_missing_column(tmp_path):
    path = tmp_path / "coeffs.csv"
    pd.DataFrame({"z": [0.0, 1.0], "sigma_b": [1.0, 1.0]}).to_csv(path, index=False)
    with pytest.raises(ProfileError, match="missing columns"):
        CoefficientProfile.read_csv(path)


@pytest.mark.parametrize("rho", [-0.99, -0.5, 0.0])
def test_general_quadrature_matches_arctan_closed_form(rho):
    coeffs = CoefficientProfile.constant(1.3, 1.3, rho)
    curve = pup_general(coeffs)
    np.testing.assert_allclose(curve.p, pup_closed_form_imbalance(curve.z, rho), atol=1e-6)


def test_perfect_anticorrelation_gives_identity():
    curve = pup_general(CoefficientProfile.constant(1.0, 1.0, -1.0))
    np.testing.assert_allclose(curve.p, curve.z, atol=1e-10)


def test_quarter_imbalance_independent_queues():
    curve = pup_general(CoefficientProfile.constant(1.0, 1.0, 0.0), z=[0.25])
    assert curve.p[0] == pytest.approx(2.0 / np.pi * np.arctan(1.0 / 3.0), abs=1e-6)


def test_general_curve_is_monotone_with_endpoints(jpm_coefficients):
    curve = pup_general(jpm_coefficients)
    assert curve.p[0] == pytest.approx(0.0, abs=1e-12)
    assert curve.p[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(curve.p) >= 0)
    assert curve.error_estimate < 1e-5


def test_symmetric_profile_is_half_at_balance():
    coeffs = CoefficientProfile(z=[0.0, 0.5, 1.0], sigma_b=[1.0, 1.5, 2.0], sigma_a=[2.0, 1.5, 1.0],
                                rho=[-0.2, -0.6, -0.2])
    assert coeffs.is_symmetric()
    assert pup_general(coeffs, z=[0.5]).p[0] == pytest.approx(0.5, abs=1e-9)


def test_scaling_coefficients_leaves_curve_unchanged(jpm_coefficients):
    z = np.linspace(0.05, 0.95, 7)
    base = pup_general(jpm_coefficients, z=z).p
    scaled = pup_general(jpm_coefficients.scaled(3.0), z=z).p
    np.testing.assert_allclose(base, scaled, atol=1e-12)


def test_hidden_liquidity_endpoints_and_affine_identity():
    rng = np.random.default_rng(11)
    for _ in range(5):
        z = np.linspace(0.0, 1.0, 6)
        coeffs = CoefficientProfile(z=z, sigma_b=rng.uniform(0.5, 2.0, 6), sigma_a=rng.uniform(0.5, 2.0, 6),
                                    rho=rng.uniform(-0.9, 0.0, 6))
        H = float(rng.uniform(0.0, 0.5))
        hidden = pup_hidden(coeffs, H)
        base = pup_general(coeffs)
        assert hidden.p[0] == pytest.approx(H, abs=1e-8)
        assert hidden.p[-1] == pytest.approx(1.0 - H, abs=1e-8)
        np.testing.assert_allclose(hidden.p, H + (1.0 - 2.0 * H) * base.p, atol=1e-14)


def test_hidden_liquidity_half_is_flat():
    curve = pup_hidden(CoefficientProfile.constant(1.0, 1.0, -0.3), 0.5)
    np.testing.assert_allclose(curve.p, 0.5)


def test_hidden_liquidity_out_of_range():
    with pytest.raises(DomainError):
        pup_hidden(CoefficientProfile.constant(1.0, 1.0, 0.0), 0.6)


def test_singular_coefficients_report_offending_z():
    coeffs = CoefficientProfile.constant(1.0, 1.0, 1.0)
    with pytest.raises(SingularCoefficientError) as info:
        mu_nu(coeffs, np.linspace(0, 1, 101))
    assert info.value.z == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("z", [0.0, 0.3, 0.5, 1.0])
def test_perfect_anticorrelation_has_no_slope(z):
    mu, nu = mu_nu(CoefficientProfile.constant(1.3, 1.3, -1.0), [z])
    assert mu[0] == pytest.approx(0.0, abs=1e-12)
    assert nu[0] == pytest.approx(1.69)


def test_independent_queues_slope_at_edge_and_balance():
    mu, nu = mu_nu(CoefficientProfile.constant(1.3, 1.3, 0.0), [0.0, 0.5])
    np.testing.assert_allclose(mu, [-2.0 * 1.69, 0.0], atol=1e-12)
    np.testing.assert_allclose(nu, [1.69, 1.69 / 2.0])


def test_symmetric_profile_curve_is_antisymmetric():
    coeffs = CoefficientProfile(z=[0.0, 0.5, 1.0], sigma_b=[1.0, 1.5, 2.0], sigma_a=[2.0, 1.5, 1.0],
                                rho=[-0.2, -0.6, -0.2])
    curve = pup_general(coeffs)
    assert curve.z.size == 101
    np.testing.assert_allclose(curve.p + curve.p[::-1], 1.0, atol=1e-8)


def test_doubling_the_panels_changes_little():
    coeffs = CoefficientProfile.constant(1.0, 1.5, -0.4)
    base = pup_general(coeffs)
    fine = pup_general(coeffs, QuadratureControls(panels=8192))
    assert np.max(np.abs(base.p - fine.p)) <= 1e-7


def test_endpoint_report():
    curve = pup_hidden(CoefficientProfile.constant(1.0, 1.0, 0.0), 0.1, QuadratureControls(points=11))
    report = curve.endpoint_report()
    assert report["p_at_0_ok"] and report["p_at_1_ok"]
    assert report["H"] == 0.1


def test_pup_curve_interpolates():
    curve = PupCurve(H=0.0, z=np.array([0.0, 1.0]), p=np.array([0.0, 1.0]))
    assert curve(0.3) == pytest.approx(0.3)


def test_quadrature_controls_validation():
    with pytest.raises(DomainError):
        QuadratureControls(panels=10)
    assert QuadratureControls(panels=100).halved().panels == 64
