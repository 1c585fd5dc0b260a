"""Anisotropic noise modeling and cross-display calibration for XYZ measurements.

Tristimulus measurements of emissive displays carry noise that concentrates
along the direction of the measured XYZ vector itself. This package models
that structure with a two-parameter covariance (scale and anisotropy ratio),
fits the parameters from repeated measurements, simulates campaigns under
the model, and uses the covariance as the weight in least-squares fitting of
3x3 cross-display calibration matrices.
"""

from .calibration import (
    CalibrationMatrix,
    EvaluationResult,
    MeasurementPair,
    apply,
    build_design_row,
    evaluate,
    fit_matrix,
    pairs_from_records,
    wls_objective,
)
from .colorspace import (
    Chromaticity,
    LabColor,
    Tristimulus,
    chromaticity,
    delta_e76,
    lab_to_xyz,
    scale_invariance_check,
    xyz_to_lab,
)
from .errors import (
    NumericalError,
    ParseError,
    ToolkitError,
    ValidationError,
)
from .noise_model import (
    BETWEEN_PANEL_A,
    DEFAULT_RATIO,
    WITHIN_PANEL_A,
    DirectionBasis,
    DirectionalStd,
    FitResult,
    NoiseModel,
    between_panel_model,
    covariance,
    covariance_factor,
    direction_basis,
    directional_stats,
    directional_std,
    fit_k,
    fit_noise_model,
    fit_noise_model_detailed,
    principal_axis,
    sample_mean,
    within_panel_model,
)
from .records import MeasurementRecord, read_measurements, write_measurements
from .simulator import (
    CampaignSpec,
    ClampCounter,
    PanelSpec,
    run_campaign,
    sample_measurement,
    sample_measurements,
    sample_panel,
)

__version__ = "0.1.0"

__all__ = [
    "BETWEEN_PANEL_A",
    "CalibrationMatrix",
    "CampaignSpec",
    "Chromaticity",
    "ClampCounter",
    "DEFAULT_RATIO",
    "DirectionBasis",
    "DirectionalStd",
    "EvaluationResult",
    "FitResult",
    "LabColor",
    "MeasurementPair",
    "MeasurementRecord",
    "NoiseModel",
    "NumericalError",
    "PanelSpec",
    "ParseError",
    "ToolkitError",
    "Tristimulus",
    "ValidationError",
    "WITHIN_PANEL_A",
    "apply",
    "between_panel_model",
    "build_design_row",
    "chromaticity",
    "covariance",
    "covariance_factor",
    "delta_e76",
    "direction_basis",
    "directional_stats",
    "directional_std",
    "evaluate",
    "fit_k",
    "fit_matrix",
    "fit_noise_model",
    "fit_noise_model_detailed",
    "lab_to_xyz",
    "pairs_from_records",
    "principal_axis",
    "read_measurements",
    "run_campaign",
    "sample_mean",
    "sample_measurement",
    "sample_measurements",
    "sample_panel",
    "scale_invariance_check",
    "within_panel_model",
    "write_measurements",
    "xyz_to_lab",
]
