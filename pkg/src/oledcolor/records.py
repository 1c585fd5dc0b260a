"""Measurement records and the CSV interchange format.

Fixed header `panel_id,color_id,brightness,repeat_index,timestamp,X,Y,Z`,
UTF-8, decimal point, no locale. The timestamp field may be empty. Floats
are written with repr so a write/read round trip is bit-exact.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .colorspace import Tristimulus
from .errors import ParseError, ValidationError

CSV_HEADER = ["panel_id", "color_id", "brightness", "repeat_index", "timestamp", "X", "Y", "Z"]


@dataclass(frozen=True)
class MeasurementRecord:
    """One tristimulus measurement tagged with its campaign coordinates."""

    panel_id: str
    color_id: str
    brightness: float
    repeat_index: int
    timestamp: float | None
    X: float
    Y: float
    Z: float

    def __post_init__(self):
        if not self.panel_id:
            raise ValidationError("panel_id must be non-empty")
        if not self.color_id:
            raise ValidationError("color_id must be non-empty")
        if not (math.isfinite(self.brightness) and 0 < self.brightness <= 1):
            raise ValidationError(f"brightness must be in (0, 1], got {self.brightness!r}")
        if self.repeat_index < 0:
            raise ValidationError(f"repeat_index must be >= 0, got {self.repeat_index}")
        if self.timestamp is not None and not math.isfinite(self.timestamp):
            raise ValidationError(f"timestamp must be finite, got {self.timestamp!r}")
        for name in ("X", "Y", "Z"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be finite and non-negative, got {value!r}")
            object.__setattr__(self, name, value)

    def key(self) -> tuple[str, str, float, int]:
        return (self.panel_id, self.color_id, self.brightness, self.repeat_index)

    def tristimulus(self) -> Tristimulus:
        return Tristimulus(self.X, self.Y, self.Z)


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write text to path atomically (temp file in the same directory + rename)."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_float(raw: str, line: int, column: str, path: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ParseError(f"not a number: {raw!r}", path=path, line=line, column=column) from exc


def _parse_int(raw: str, line: int, column: str, path: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ParseError(f"not an integer: {raw!r}", path=path, line=line, column=column) from exc


def read_measurements(path: str | Path) -> list[MeasurementRecord]:
    """Read and validate a measurement CSV.

    Rejects malformed rows, duplicate (panel, color, brightness, repeat) keys
    and out-of-range values, naming the offending line.
    """
    path = Path(path)
    records: list[MeasurementRecord] = []
    seen: dict[tuple, int] = {}
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, expected header", path=str(path), line=1) from None
        if header != CSV_HEADER:
            raise ParseError(
                f"bad header {header!r}, expected {CSV_HEADER!r}", path=str(path), line=1)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ParseError(
                    f"expected {len(CSV_HEADER)} fields, got {len(row)}",
                    path=str(path), line=line_no)
            panel_id, color_id, brightness_s, repeat_s, ts_s, x_s, y_s, z_s = row
            brightness = _parse_float(brightness_s, line_no, "brightness", str(path))
            repeat = _parse_int(repeat_s, line_no, "repeat_index", str(path))
            timestamp = None if ts_s == "" else _parse_float(ts_s, line_no, "timestamp", str(path))
            x = _parse_float(x_s, line_no, "X", str(path))
            y = _parse_float(y_s, line_no, "Y", str(path))
            z = _parse_float(z_s, line_no, "Z", str(path))
            try:
                record = MeasurementRecord(panel_id, color_id, brightness, repeat,
                                           timestamp, x, y, z)
            except ValidationError as exc:
                raise ValidationError(f"{path}, line {line_no}: {exc}") from exc
            key = record.key()
            if key in seen:
                raise ValidationError(
                    f"{path}, line {line_no}: duplicate measurement key {key}, "
                    f"first seen on line {seen[key]}")
            seen[key] = line_no
            records.append(record)
    return records


def _format_float(value: float) -> str:
    return repr(float(value))


def measurements_to_csv(records: Iterable[MeasurementRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in records:
        writer.writerow([
            rec.panel_id,
            rec.color_id,
            _format_float(rec.brightness),
            str(rec.repeat_index),
            "" if rec.timestamp is None else _format_float(rec.timestamp),
            _format_float(rec.X),
            _format_float(rec.Y),
            _format_float(rec.Z),
        ])
    return buffer.getvalue()


def write_measurements(path: str | Path, records: Sequence[MeasurementRecord]) -> None:
    """Write records as CSV; atomic so readers never see a partial file."""
    atomic_write_text(path, measurements_to_csv(records))
