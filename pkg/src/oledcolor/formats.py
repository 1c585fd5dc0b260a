"""Versioned key-value text documents for fitted models and matrices.

Format: one `key = value` per line, `#` comments, UTF-8. Every document
states `format_version` and `type` so future revisions stay recognizable
without binary tooling. Floats are written with repr for exact round trips.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping

import numpy as np

from .analysis import DeltaEHistogram
from .calibration import CalibrationMatrix
from .errors import ParseError, ValidationError
from .noise_model import NoiseModel
from .records import atomic_write_text

FORMAT_VERSION = 1

NOISE_MODEL_TYPE = "noise_model"
CALIBRATION_MATRIX_TYPE = "calibration_matrix"


def _render(doc_type: str, fields: Mapping[str, object]) -> str:
    lines = [f"format_version = {FORMAT_VERSION}", f"type = {doc_type}"]
    for key, value in fields.items():
        if isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _parse_document(path: str | Path, expected_type: str) -> dict[str, str]:
    fields: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", path=str(path), line=line_no)
        key, _, value = line.partition("=")
        key = key.strip()
        if key in fields:
            raise ParseError(f"duplicate key {key!r}", path=str(path), line=line_no)
        fields[key] = value.strip()
    version = fields.pop("format_version", None)
    if version is None:
        raise ParseError("missing format_version", path=str(path))
    if version != str(FORMAT_VERSION):
        raise ParseError(f"unsupported format_version {version!r}", path=str(path))
    doc_type = fields.pop("type", None)
    if doc_type != expected_type:
        raise ParseError(f"expected type {expected_type!r}, got {doc_type!r}", path=str(path))
    return fields


def _field_float(fields: Mapping[str, str], key: str, path: str | Path) -> float:
    if key not in fields:
        raise ParseError(f"missing field {key!r}", path=str(path))
    try:
        return float(fields[key])
    except ValueError as exc:
        raise ParseError(f"field {key!r} is not a number: {fields[key]!r}",
                         path=str(path)) from exc


def write_noise_model(path: str | Path, model: NoiseModel,
                      metadata: Mapping[str, object] | None = None) -> None:
    """Serialize a noise model plus optional fit metadata (k values etc.)."""
    fields: dict[str, object] = {
        "a": float(model.a),
        "ratio": float(model.ratio),
        "provenance": model.provenance,
    }
    for key, value in (metadata or {}).items():
        if key in fields:
            raise ValidationError(f"metadata key {key!r} collides with a model field")
        fields[key] = value
    atomic_write_text(path, _render(NOISE_MODEL_TYPE, fields))


def read_noise_model(path: str | Path) -> tuple[NoiseModel, dict[str, str]]:
    """Load a noise model; unknown keys are returned as metadata."""
    fields = _parse_document(path, NOISE_MODEL_TYPE)
    a = _field_float(fields, "a", path)
    ratio = _field_float(fields, "ratio", path)
    provenance = fields.pop("provenance", "fitted")
    fields.pop("a")
    fields.pop("ratio")
    try:
        model = NoiseModel(a=a, ratio=ratio, provenance=provenance)  # type: ignore[arg-type]
    except ValidationError as exc:
        raise ParseError(f"invalid noise model: {exc}", path=str(path)) from exc
    return model, fields


def write_calibration_matrix(path: str | Path, calib: CalibrationMatrix) -> None:
    """Serialize a calibration matrix: 9 row-major entries plus diagnostics."""
    fields: dict[str, object] = {
        "weighting": calib.weighting,
        "fit_pairs": calib.fit_pairs,
        "condition_number": float(calib.condition_number),
    }
    for i in range(3):
        for j in range(3):
            fields[f"m_{i + 1}_{j + 1}"] = float(calib.M[i, j])
    atomic_write_text(path, _render(CALIBRATION_MATRIX_TYPE, fields))


def read_calibration_matrix(path: str | Path) -> CalibrationMatrix:
    fields = _parse_document(path, CALIBRATION_MATRIX_TYPE)
    M = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            M[i, j] = _field_float(fields, f"m_{i + 1}_{j + 1}", path)
    weighting = fields.get("weighting", "")
    fit_pairs_raw = fields.get("fit_pairs", "")
    try:
        fit_pairs = int(fit_pairs_raw)
    except ValueError as exc:
        raise ParseError(f"fit_pairs is not an integer: {fit_pairs_raw!r}",
                         path=str(path)) from exc
    condition = _field_float(fields, "condition_number", path)
    try:
        return CalibrationMatrix(M=M, weighting=weighting,  # type: ignore[arg-type]
                                 fit_pairs=fit_pairs, condition_number=condition)
    except ValidationError as exc:
        raise ParseError(f"invalid calibration matrix: {exc}", path=str(path)) from exc


def read_external_histogram(path: str | Path) -> DeltaEHistogram:
    """Load a third-party delta E histogram for side-by-side comparison.

    CSV schema: header `bin_low,bin_high,count` with contiguous bins. The
    file's own bin edges are preserved; the mean is reconstructed from bin
    midpoints (lower edge for an open-ended last bin), so it is approximate.
    """
    path = Path(path)
    rows: list[tuple[float, float, int]] = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["bin_low", "bin_high", "count"]:
            raise ParseError(f"bad header {header!r}, expected bin_low,bin_high,count",
                             path=str(path), line=1)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}",
                                 path=str(path), line=line_no)
            try:
                low, high, count = float(row[0]), float(row[1]), int(row[2])
            except ValueError as exc:
                raise ParseError(f"bad row {row!r}", path=str(path), line=line_no) from exc
            if count < 0 or high <= low:
                raise ParseError(f"bad bin {row!r}", path=str(path), line=line_no)
            rows.append((low, high, count))
    if not rows:
        raise ParseError("histogram file has no bins", path=str(path))
    rows.sort()
    for (_, prev_high, _), (low, _, _) in zip(rows, rows[1:]):
        if prev_high != low:
            raise ParseError(f"bins are not contiguous at edge {low!r}", path=str(path))
    values = []
    for low, high, count in rows:
        mid = low if np.isinf(high) else 0.5 * (low + high)
        values.extend([mid] * count)
    edges = (rows[0][0], *(high for _, high, _ in rows))
    return DeltaEHistogram(
        bin_edges=tuple(float(e) for e in edges),
        counts=tuple(count for _, _, count in rows),
        mean=float(np.mean(values)) if values else 0.0,
        grouping="external_between_regions",
        values=tuple(values),
    )
