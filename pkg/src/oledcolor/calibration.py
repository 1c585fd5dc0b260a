"""Weighted linear least-squares fit of a 3x3 cross-display color transform.

Finds M so that reference measurements match M times source measurements.
Each pair contributes a 3x9 design block; stacking the blocks and weighting
by the inverse noise covariance of the reference measurement gives

    m = (H^T W H)^{-1} H^T W c_hat,    W = blockdiag((2 P_hat_i)^{-1}),

with m the row-major vectorization of M. The scalar in front of the
covariance cancels, so M never depends on the model's scale multiplier a,
only on the anisotropy ratio and the reference directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
import scipy.linalg

from .colorspace import Tristimulus
from .errors import (
    EmptyInputError,
    RankDeficiencyError,
    SingularSystemError,
    UnknownColorError,
    ValidationError,
)
from .noise_model import NoiseModel, covariance

Weighting = Literal["proposed", "uniform"]

MAX_CONDITION_NUMBER = 1e12


@dataclass(frozen=True)
class MeasurementPair:
    """A source measurement and the reference measurement it should map to."""

    source: Tristimulus
    reference: Tristimulus
    color_id: str = ""

    def __post_init__(self):
        if self.source.total <= 0:
            raise ValidationError(f"source measurement must have X+Y+Z > 0 ({self.color_id!r})")
        if self.reference.total <= 0:
            raise ValidationError(f"reference measurement must have X+Y+Z > 0 ({self.color_id!r})")


@dataclass(frozen=True, eq=False)
class CalibrationMatrix:
    """Fitted 3x3 map from source XYZ to reference XYZ, with diagnostics."""

    M: np.ndarray
    weighting: Weighting
    fit_pairs: int
    condition_number: float

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        if M.shape != (3, 3):
            raise ValidationError(f"calibration matrix must be 3x3, got {M.shape}")
        if not np.all(np.isfinite(M)):
            raise ValidationError("calibration matrix entries must be finite")
        if self.weighting not in ("proposed", "uniform"):
            raise ValidationError(f"unknown weighting {self.weighting!r}")
        if self.fit_pairs < 3:
            raise ValidationError(f"calibration needs >= 3 pairs, got {self.fit_pairs}")
        M.setflags(write=False)
        object.__setattr__(self, "M", M)


def build_design_row(pair: MeasurementPair) -> tuple[np.ndarray, np.ndarray]:
    """Design block H_i (3x9) and target c_hat_i for one measurement pair.

    Row-major ordering of the unknown vector: (m11, m12, ..., m33), so
    H_i = I_3 kron (X_i, Y_i, Z_i).
    """
    c = pair.source.as_array()
    H = np.kron(np.eye(3), c.reshape(1, 3))
    return H, pair.reference.as_array()


def _pair_weight(pair: MeasurementPair, model: NoiseModel | None,
                 weighting: Weighting) -> np.ndarray:
    if weighting == "uniform":
        return np.eye(3)
    if model is None:
        raise ValidationError("proposed weighting requires a noise model")
    return np.linalg.inv(2.0 * covariance(model, pair.reference))


def fit_matrix(pairs: Sequence[MeasurementPair], model: NoiseModel | None,
               weighting: Weighting = "proposed") -> CalibrationMatrix:
    """Fit the calibration matrix by weighted linear least squares.

    Requires at least 3 pairs with linearly independent source vectors.
    "proposed" weights each residual by the inverse model covariance at the
    reference measurement; "uniform" weights all components equally.
    """
    if weighting not in ("proposed", "uniform"):
        raise ValidationError(f"unknown weighting {weighting!r}")
    pair_list = list(pairs)
    if len(pair_list) < 3:
        raise RankDeficiencyError(
            f"calibration requires at least 3 measurements, got {len(pair_list)}")
    sources = np.array([p.source.as_array() for p in pair_list])
    if np.linalg.matrix_rank(sources) < 3:
        raise RankDeficiencyError(
            "source measurements span fewer than 3 dimensions; "
            "add linearly independent colors")

    A = np.zeros((9, 9))
    b = np.zeros(9)
    for pair in pair_list:
        H, target = build_design_row(pair)
        W = _pair_weight(pair, model, weighting)
        A += H.T @ W @ H
        b += H.T @ W @ target

    condition = float(np.linalg.cond(A))
    if not math.isfinite(condition) or condition > MAX_CONDITION_NUMBER:
        raise SingularSystemError(
            f"normal equations condition number {condition:.3e} exceeds "
            f"{MAX_CONDITION_NUMBER:.0e}; measurements are too close to coplanar")
    A = 0.5 * (A + A.T)
    try:
        m = scipy.linalg.cho_solve(scipy.linalg.cho_factor(A), b)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystemError(f"normal equations not positive definite: {exc}") from exc

    return CalibrationMatrix(
        M=m.reshape(3, 3),
        weighting=weighting,
        fit_pairs=len(pair_list),
        condition_number=condition,
    )


def apply(calib: CalibrationMatrix, c: Tristimulus) -> np.ndarray:
    """Map a source measurement through the calibration matrix.

    The raw product is returned; small negative components are possible and
    any clamping is left to the reporting layer.
    """
    return calib.M @ c.as_array()


@dataclass(frozen=True)
class PairError:
    color_id: str
    abs_error: float


@dataclass(frozen=True)
class EvaluationResult:
    """Holdout errors: sum of absolute XYZ differences per pair."""

    per_pair: tuple[PairError, ...]
    mean_abs_error: float
    per_color_mean: dict[str, float]


def evaluate(calib: CalibrationMatrix, holdout: Sequence[MeasurementPair]) -> EvaluationResult:
    """Sum-of-absolute-XYZ-differences of calibrated source vs reference."""
    pair_list = list(holdout)
    if not pair_list:
        raise EmptyInputError("evaluation needs a non-empty holdout set")
    per_pair = []
    by_color: dict[str, list[float]] = {}
    for pair in pair_list:
        err = float(np.abs(pair.reference.as_array() - apply(calib, pair.source)).sum())
        per_pair.append(PairError(color_id=pair.color_id, abs_error=err))
        by_color.setdefault(pair.color_id, []).append(err)
    mean_err = float(np.mean([p.abs_error for p in per_pair]))
    per_color = {cid: float(np.mean(errs)) for cid, errs in sorted(by_color.items())}
    return EvaluationResult(per_pair=tuple(per_pair), mean_abs_error=mean_err,
                            per_color_mean=per_color)


def wls_objective(pairs: Sequence[MeasurementPair], model: NoiseModel | None,
                  M: np.ndarray, weighting: Weighting = "proposed") -> float:
    """Weighted residual objective sum (c_hat - M c)^T W (c_hat - M c).

    The quantity fit_matrix minimizes; exposed for optimality diagnostics.
    """
    M = np.asarray(M, dtype=float)
    total = 0.0
    for pair in pairs:
        r = pair.reference.as_array() - M @ pair.source.as_array()
        W = _pair_weight(pair, model, weighting)
        total += float(r @ W @ r)
    return total


def pairs_from_records(records, source_panel: str, reference_panel: str,
                       color_ids: Sequence[str], brightness: float = 1.0,
                       aggregate: Literal["mean", "first"] = "mean",
                       ) -> list[MeasurementPair]:
    """Build measurement pairs for two panels from a record stream.

    One pair per color id at the given brightness. "mean" averages repeats
    (reduces temporal noise at the cost of measurement time); "first" takes
    the lowest repeat index.
    """
    if aggregate not in ("mean", "first"):
        raise ValidationError(f"unknown aggregate {aggregate!r}")
    wanted = {source_panel, reference_panel}
    grouped: dict[tuple[str, str], list] = {}
    for rec in records:
        if rec.panel_id in wanted and rec.brightness == brightness:
            grouped.setdefault((rec.panel_id, rec.color_id), []).append(rec)

    def pick(panel: str, color: str) -> Tristimulus:
        group = grouped.get((panel, color))
        if not group:
            raise UnknownColorError(
                f"no measurement of color {color!r} at brightness {brightness} "
                f"for panel {panel!r}")
        if aggregate == "first":
            rec = min(group, key=lambda r: r.repeat_index)
            return rec.tristimulus()
        arr = np.mean([[r.X, r.Y, r.Z] for r in group], axis=0)
        return Tristimulus.from_array(arr)

    return [
        MeasurementPair(source=pick(source_panel, cid),
                        reference=pick(reference_panel, cid),
                        color_id=cid)
        for cid in color_ids
    ]
