"""
Model core

Domain types and the analytic/numeric machinery for the imbalance-driven
queue diffusion:
- intensity to coefficient mapping and the driftless check
- quadrature P_up with and without hidden liquidity
- closed forms for constant correlation and for drifted Brownian queues
- PDE residual check
"""

from .base import (
    COEFFICIENT_COLUMNS,
    RATE_COLUMNS,
    CoefficientProfile,
    DriftlessReport,
    IntensityProfile,
    PupCurve,
    QuadratureControls,
    coefficients_from_intensities,
    imbalance,
    imbalance_array,
    validate_driftless,
)
from .closed_form import pup_closed_form_corr, pup_closed_form_imbalance
from .pde import pde_residual
from .pup import mu_nu, pup_general, pup_hidden
from .wedge import DriftedBmSpec, WedgeQuadrature, pup_drifted_bm

__all__ = [
    # Types
    "CoefficientProfile",
    "DriftlessReport",
    "IntensityProfile",
    "PupCurve",
    "QuadratureControls",
    "DriftedBmSpec",
    "WedgeQuadrature",
    "RATE_COLUMNS",
    "COEFFICIENT_COLUMNS",
    # Mapping
    "imbalance",
    "imbalance_array",
    "validate_driftless",
    "coefficients_from_intensities",
    # Probabilities
    "mu_nu",
    "pup_general",
    "pup_hidden",
    "pup_closed_form_corr",
    "pup_closed_form_imbalance",
    "pup_drifted_bm",
    "pde_residual",
]
