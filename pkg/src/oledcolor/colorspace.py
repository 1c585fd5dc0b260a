"""Core color types: XYZ tristimulus, chromaticity, CIELAB, and CIE76 delta E.

Tristimulus values carry arbitrary radiometric units; only consistency within
a dataset matters. The reference white for CIELAB is always an explicit
parameter, never an implicit standard illuminant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import (
    DegenerateColorError,
    DegenerateWhiteError,
    MismatchedWhiteError,
    ValidationError,
)

# CIE 1976 two-branch constants: cube root above _LAB_EPSILON, linear below.
_LAB_EPSILON = 216.0 / 24389.0
_LAB_KAPPA = 24389.0 / 27.0

CHROMATICITY_TOLERANCE = 1e-12
WHITE_MATCH_RTOL = 1e-9


@dataclass(frozen=True)
class Tristimulus:
    """One XYZ color measurement. Components are finite and non-negative."""

    X: float
    Y: float
    Z: float

    def __post_init__(self):
        for name in ("X", "Y", "Z"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValidationError(f"tristimulus {name} must be finite, got {value!r}")
            if value < 0:
                raise ValidationError(f"tristimulus {name} must be non-negative, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def total(self) -> float:
        return self.X + self.Y + self.Z

    def as_array(self) -> np.ndarray:
        return np.array([self.X, self.Y, self.Z], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "Tristimulus":
        x, y, z = np.asarray(arr, dtype=float).reshape(3)
        return cls(float(x), float(y), float(z))

    def scaled(self, s: float) -> "Tristimulus":
        if not (math.isfinite(s) and s > 0):
            raise ValidationError(f"scale factor must be positive and finite, got {s!r}")
        return Tristimulus(self.X * s, self.Y * s, self.Z * s)


@dataclass(frozen=True)
class Chromaticity:
    """Luminance-normalized color coordinates x = X/(X+Y+Z), y = Y/(X+Y+Z)."""

    x: float
    y: float

    def __post_init__(self):
        for name in ("x", "y"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0 or value > 1:
                raise ValidationError(f"chromaticity {name} must be in [0, 1], got {value!r}")
            object.__setattr__(self, name, value)
        # Boundary values occur for tristimuli with zero components; strictly
        # positive inputs land in the open triangle.
        if self.x + self.y > 1 + CHROMATICITY_TOLERANCE:
            raise ValidationError(f"chromaticity requires x + y <= 1, got {self.x + self.y!r}")

    @property
    def z(self) -> float:
        return 1.0 - self.x - self.y


@dataclass(frozen=True)
class LabColor:
    """CIELAB coordinates, tagged with the reference white they were computed against."""

    L_star: float
    a_star: float
    b_star: float
    reference_white: Tristimulus

    def __post_init__(self):
        for name in ("L_star", "a_star", "b_star"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValidationError(f"Lab component {name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.L_star < 0:
            raise ValidationError(f"L* must be non-negative, got {self.L_star!r}")


def xyz_matrix(samples: Iterable) -> np.ndarray:
    """Stack tristimulus samples into an (m, 3) float array.

    Accepts a sequence of Tristimulus, a sequence of length-3 array-likes, or
    an already-shaped (m, 3) array.
    """
    if isinstance(samples, np.ndarray):
        arr = np.asarray(samples, dtype=float)
    else:
        rows = [s.as_array() if isinstance(s, Tristimulus) else np.asarray(s, dtype=float)
                for s in samples]
        arr = np.array(rows, dtype=float) if rows else np.empty((0, 3))
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValidationError(f"expected samples of shape (m, 3), got {arr.shape}")
    return arr


def chromaticity(c: Tristimulus) -> Chromaticity:
    """Project a tristimulus onto the chromaticity plane."""
    s = c.total
    if s <= 0:
        raise DegenerateColorError("chromaticity undefined for X+Y+Z = 0")
    return Chromaticity(c.X / s, c.Y / s)


def scale_invariance_check(c: Tristimulus, s: float,
                           tolerance: float = CHROMATICITY_TOLERANCE) -> bool:
    """True iff chromaticity(s*c) equals chromaticity(c) within tolerance.

    Scaling the tristimulus vector leaves its direction unchanged, so the
    chromaticity projection must not move; this helper makes that check
    available to tests and diagnostics.
    """
    base = chromaticity(c)
    scaled = chromaticity(c.scaled(s))
    return abs(scaled.x - base.x) <= tolerance and abs(scaled.y - base.y) <= tolerance


def _lab_f(t: float) -> float:
    if t > _LAB_EPSILON:
        return t ** (1.0 / 3.0)
    return (_LAB_KAPPA * t + 16.0) / 116.0


def _lab_f_inv(u: float) -> float:
    u3 = u * u * u
    if u3 > _LAB_EPSILON:
        return u3
    return (116.0 * u - 16.0) / _LAB_KAPPA


def _check_white(white: Tristimulus) -> None:
    if white.X <= 0 or white.Y <= 0 or white.Z <= 0:
        raise DegenerateWhiteError(
            f"reference white must be strictly positive, got ({white.X}, {white.Y}, {white.Z})")


def xyz_to_lab(c: Tristimulus, white: Tristimulus) -> LabColor:
    """Convert XYZ to CIELAB relative to the given white."""
    _check_white(white)
    fx = _lab_f(c.X / white.X)
    fy = _lab_f(c.Y / white.Y)
    fz = _lab_f(c.Z / white.Z)
    return LabColor(
        L_star=116.0 * fy - 16.0,
        a_star=500.0 * (fx - fy),
        b_star=200.0 * (fy - fz),
        reference_white=white,
    )


def lab_to_xyz(lab: LabColor) -> Tristimulus:
    """Invert xyz_to_lab; exact for in-gamut non-negative inputs."""
    white = lab.reference_white
    _check_white(white)
    fy = (lab.L_star + 16.0) / 116.0
    fx = fy + lab.a_star / 500.0
    fz = fy - lab.b_star / 200.0
    return Tristimulus(
        white.X * _lab_f_inv(fx),
        white.Y * _lab_f_inv(fy),
        white.Z * _lab_f_inv(fz),
    )


def _whites_match(p: Tristimulus, q: Tristimulus) -> bool:
    return all(
        math.isclose(a, b, rel_tol=WHITE_MATCH_RTOL, abs_tol=0.0)
        for a, b in ((p.X, q.X), (p.Y, q.Y), (p.Z, q.Z))
    )


def delta_e76(p: LabColor, q: LabColor) -> float:
    """CIE76 color difference: Euclidean distance in (L*, a*, b*)."""
    if not _whites_match(p.reference_white, q.reference_white):
        raise MismatchedWhiteError(
            "delta E compares Lab colors computed against the same reference white; "
            f"got {p.reference_white} vs {q.reference_white}")
    return math.sqrt(
        (p.L_star - q.L_star) ** 2
        + (p.a_star - q.a_star) ** 2
        + (p.b_star - q.b_star) ** 2
    )
