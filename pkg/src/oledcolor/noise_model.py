"""Anisotropic noise model for tristimulus measurements.

Measured XYZ noise concentrates along the direction of the measured vector
itself. This module provides the orthonormal frame anchored on that
direction, directional standard deviations, the linear fit of the
std-per-(X+Y+Z) coefficient, a PCA cross-check of the dominant axis, and the
covariance constructor

    P = a^2 (X+Y+Z)^2  U diag(ratio^2, 1, 1) U^T,   U = [v1 v2 v3],

where v1 points along (X, Y, Z) and ratio is the anisotropy factor (default
5). The scale multiplier defaults to a = 1/2000 for repeated measurements of
one panel and a = 1/400 for variation across panels of the same type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple, Sequence

import numpy as np

from .colorspace import Tristimulus, xyz_matrix
from .errors import (
    DegenerateColorError,
    EmptyInputError,
    NonUnitVectorError,
    TooFewSamplesError,
    ValidationError,
    ZeroVarianceError,
)

Direction = Literal["X", "Y", "Z", "v1", "v2", "v3"]
Provenance = Literal["within_panel", "between_panel", "fitted"]

WITHIN_PANEL_A = 1.0 / 2000.0
BETWEEN_PANEL_A = 1.0 / 400.0
DEFAULT_RATIO = 5.0

_UNIT_TOL = 1e-12
_UNIT_INPUT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DirectionBasis:
    """Right-handed orthonormal frame with v1 along the anchor's XYZ vector."""

    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray
    anchor: Tristimulus

    def __post_init__(self):
        for name in ("v1", "v2", "v3"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValidationError(f"{name} must be a 3-vector")
            if abs(np.linalg.norm(v) - 1.0) > _UNIT_TOL:
                raise NonUnitVectorError(f"{name} must be unit length")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if (abs(self.v1 @ self.v2) > _UNIT_TOL
                or abs(self.v1 @ self.v3) > _UNIT_TOL
                or abs(self.v2 @ self.v3) > _UNIT_TOL):
            raise ValidationError("basis vectors must be pairwise orthogonal")

    def matrix(self) -> np.ndarray:
        """Column-stacked U = [v1 v2 v3]."""
        return np.column_stack([self.v1, self.v2, self.v3])


@dataclass(frozen=True)
class DirectionalStd:
    """Standard deviations of one sample group along its v1/v2/v3 frame."""

    sigma_v1: float
    sigma_v2: float
    sigma_v3: float
    sum_xyz: float          # X+Y+Z of the group's sample mean
    color_id: str
    panel_id: str
    sample_count: int

    def __post_init__(self):
        for name in ("sigma_v1", "sigma_v2", "sigma_v3"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be finite and non-negative")
            object.__setattr__(self, name, value)
        if not (math.isfinite(self.sum_xyz) and self.sum_xyz > 0):
            raise ValidationError(f"sum_xyz must be positive, got {self.sum_xyz!r}")
        if self.sample_count < 2:
            raise ValidationError(f"sample_count must be >= 2, got {self.sample_count}")

    def sigma(self, direction: Direction) -> float:
        return {"v1": self.sigma_v1, "v2": self.sigma_v2, "v3": self.sigma_v3}[direction]


@dataclass(frozen=True)
class NoiseModel:
    """Scale multiplier and anisotropy ratio of the covariance model."""

    a: float
    ratio: float = DEFAULT_RATIO
    provenance: Provenance = "within_panel"

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0):
            raise ValidationError(f"noise scale a must be positive, got {self.a!r}")
        if not (math.isfinite(self.ratio) and self.ratio >= 1):
            raise ValidationError(f"anisotropy ratio must be >= 1, got {self.ratio!r}")
        if self.provenance not in ("within_panel", "between_panel", "fitted"):
            raise ValidationError(f"unknown provenance {self.provenance!r}")


def within_panel_model(a: float = WITHIN_PANEL_A, ratio: float = DEFAULT_RATIO) -> NoiseModel:
    """Default model for repeated measurements of a single panel region."""
    return NoiseModel(a=a, ratio=ratio, provenance="within_panel")


def between_panel_model(a: float = BETWEEN_PANEL_A, ratio: float = DEFAULT_RATIO) -> NoiseModel:
    """Default model for static variation across panels of the same type."""
    return NoiseModel(a=a, ratio=ratio, provenance="between_panel")


@dataclass(frozen=True)
class FitResult:
    """Linear fit sigma ~ k * (X+Y+Z) for one direction."""

    k: float
    direction_label: Direction
    residual_rms: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k >= 0):
            raise ValidationError(f"k must be finite and non-negative, got {self.k!r}")
        if self.n < 1:
            raise ValidationError("fit needs at least one point")


def direction_basis(anchor: Tristimulus) -> DirectionBasis:
    """Orthonormal frame anchored on the anchor's XYZ direction.

    v1 = (X,Y,Z)/||(X,Y,Z)||, v2 = (0,-Z,Y)/sqrt(Y^2+Z^2), v3 = v1 x v2.
    When Y = Z = 0 the v2 formula degenerates; (0,1,0) is used instead. The
    perpendicular eigenspace of the covariance model is isotropic, so the
    fallback changes labels only, never the resulting covariance.
    """
    x, y, z = anchor.X, anchor.Y, anchor.Z
    norm = math.sqrt(x * x + y * y + z * z)
    if norm == 0:
        raise DegenerateColorError("direction basis undefined for the zero vector")
    v1 = (x / norm, y / norm, z / norm)
    perp = math.sqrt(y * y + z * z)
    if perp > 0:
        v2 = (0.0, -z / perp, y / perp)
    else:
        v2 = (0.0, 1.0, 0.0)
    # v2 is orthogonal to v1 by construction, so v1 x v2 is already unit
    # length up to rounding and [v1 v2 v3] is right-handed.
    cx = v1[1] * v2[2] - v1[2] * v2[1]
    cy = v1[2] * v2[0] - v1[0] * v2[2]
    cz = v1[0] * v2[1] - v1[1] * v2[0]
    cn = math.sqrt(cx * cx + cy * cy + cz * cz)
    v3 = (cx / cn, cy / cn, cz / cn)
    return DirectionBasis(np.array(v1), np.array(v2), np.array(v3), anchor)


def sample_mean(samples: Sequence) -> Tristimulus:
    """Component-wise arithmetic mean of tristimulus samples."""
    arr = xyz_matrix(samples)
    if arr.shape[0] == 0:
        raise EmptyInputError("sample mean of an empty sequence")
    return Tristimulus.from_array(arr.mean(axis=0))


def directional_std(samples: Sequence, v) -> float:
    """Standard deviation of the samples projected onto unit vector v.

    Population form: sqrt(sum((v.(c_i - mu))^2) / m).
    """
    arr = xyz_matrix(samples)
    if arr.shape[0] < 2:
        raise TooFewSamplesError(f"directional std needs >= 2 samples, got {arr.shape[0]}")
    v = np.asarray(v, dtype=float).reshape(3)
    if abs(np.linalg.norm(v) - 1.0) > _UNIT_INPUT_TOL:
        raise NonUnitVectorError(f"direction must be unit length, |v| = {np.linalg.norm(v)}")
    proj = (arr - arr.mean(axis=0)) @ v
    return float(np.sqrt(np.mean(proj * proj)))


def directional_stats(samples: Sequence, color_id: str = "", panel_id: str = "") -> DirectionalStd:
    """DirectionalStd of one sample group, frame anchored at the sample mean."""
    arr = xyz_matrix(samples)
    if arr.shape[0] < 2:
        raise TooFewSamplesError(f"directional stats need >= 2 samples, got {arr.shape[0]}")
    mu = sample_mean(arr)
    basis = direction_basis(mu)
    return DirectionalStd(
        sigma_v1=directional_std(arr, basis.v1),
        sigma_v2=directional_std(arr, basis.v2),
        sigma_v3=directional_std(arr, basis.v3),
        sum_xyz=mu.total,
        color_id=color_id,
        panel_id=panel_id,
        sample_count=arr.shape[0],
    )


def fit_k(points: Sequence[tuple[float, float]],
          direction_label: Direction = "v1") -> FitResult:
    """Least-squares k for sigma_j ~ k (X_j+Y_j+Z_j).

    Closed form k = sum(s_j sigma_j) / sum(s_j^2) for points (s_j, sigma_j).
    """
    pts = list(points)
    if not pts:
        raise EmptyInputError("fit_k needs at least one point")
    s = np.array([p[0] for p in pts], dtype=float)
    sigma = np.array([p[1] for p in pts], dtype=float)
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise ValidationError("all sum_xyz values must be positive and finite")
    if np.any(sigma < 0) or not np.all(np.isfinite(sigma)):
        raise ValidationError("all sigma values must be non-negative and finite")
    k = float((s * sigma).sum() / (s * s).sum())
    residual_rms = float(np.sqrt(np.mean((sigma - k * s) ** 2)))
    return FitResult(k=k, direction_label=direction_label,
                     residual_rms=residual_rms, n=len(pts))


def covariance(model: NoiseModel, c: Tristimulus) -> np.ndarray:
    """Model covariance at color c: a^2 (X+Y+Z)^2 U diag(ratio^2,1,1) U^T."""
    A = covariance_factor(model, c)
    P = A @ A.T
    return 0.5 * (P + P.T)


def covariance_factor(model: NoiseModel, c: Tristimulus) -> np.ndarray:
    """Matrix square root A of the covariance: A A^T = covariance(model, c).

    A = a (X+Y+Z) U diag(ratio, 1, 1); used for exact Gaussian sampling.
    """
    basis = direction_basis(c)
    return covariance_factor_from_basis(model, basis.matrix(), c.total)


def covariance_factor_from_basis(model: NoiseModel, U: np.ndarray, sum_xyz: float) -> np.ndarray:
    """Covariance square root from an explicit orthonormal completion U.

    Any orthonormal U whose first column is the v1 direction yields the same
    covariance: the perpendicular eigenspace is isotropic.
    """
    if sum_xyz <= 0:
        raise DegenerateColorError("covariance undefined for X+Y+Z = 0")
    U = np.asarray(U, dtype=float)
    return model.a * sum_xyz * (U * np.array([model.ratio, 1.0, 1.0]))


class PrincipalAxisResult(NamedTuple):
    """Dominant eigenvector of the sample covariance and its angle to v1."""

    axis: np.ndarray
    angle_to_v1: float


def principal_axis(samples: Sequence) -> PrincipalAxisResult:
    """Axis of maximum variation and its angle to v1 of the sample mean.

    The axis sign is chosen so axis . v1 >= 0; the angle is therefore in
    [0, 90] degrees.
    """
    arr = xyz_matrix(samples)
    if arr.shape[0] < 3:
        raise TooFewSamplesError(f"principal axis needs >= 3 samples, got {arr.shape[0]}")
    mu = arr.mean(axis=0)
    dev = arr - mu
    if not dev.any():
        raise ZeroVarianceError("principal axis undefined for identical samples")
    cov = dev.T @ dev / arr.shape[0]
    _, vectors = np.linalg.eigh(cov)
    axis = vectors[:, -1]
    v1 = direction_basis(Tristimulus.from_array(mu)).v1
    if axis @ v1 < 0:
        axis = -axis
    angle = math.degrees(math.acos(min(1.0, max(-1.0, float(axis @ v1)))))
    axis = np.asarray(axis, dtype=float)
    axis.setflags(write=False)
    return PrincipalAxisResult(axis, angle)


@dataclass(frozen=True)
class NoiseModelFit:
    """Fitted model together with its per-direction k fits."""

    model: NoiseModel
    k_v1: FitResult
    k_v2: FitResult
    k_v3: FitResult


def fit_noise_model_detailed(dataset: Sequence[DirectionalStd]) -> NoiseModelFit:
    """Fit (a, ratio) from directional stds; keeps the per-direction k fits.

    ratio = k_v1 / mean(k_v2, k_v3) and a = k_v1 / ratio, so the reported
    per-direction coefficients stay exactly the directly fitted quantities.
    """
    stds = list(dataset)
    if not stds:
        raise EmptyInputError("noise model fit needs at least one DirectionalStd")
    fits = {
        d: fit_k([(s.sum_xyz, s.sigma(d)) for s in stds], direction_label=d)
        for d in ("v1", "v2", "v3")
    }
    k_perp = 0.5 * (fits["v2"].k + fits["v3"].k)
    if k_perp == 0:
        raise ZeroVarianceError("no variance perpendicular to v1; ratio undefined")
    ratio = fits["v1"].k / k_perp
    model = NoiseModel(a=fits["v1"].k / ratio, ratio=ratio, provenance="fitted")
    return NoiseModelFit(model=model, k_v1=fits["v1"], k_v2=fits["v2"], k_v3=fits["v3"])


def fit_noise_model(dataset: Sequence[DirectionalStd]) -> NoiseModel:
    """Fit a NoiseModel from a set of directional standard deviations."""
    return fit_noise_model_detailed(dataset).model
