"""Scenario configuration: campaign shape, model constants, color sets.

Configs are JSON files; every field has a default so a minimal scenario is
`{}`. The config hash (sha256 of the canonical JSON) plus the seed pin a
pipeline run exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .colorspace import Tristimulus
from .errors import ParseError, ValidationError
from .noise_model import (
    BETWEEN_PANEL_A,
    DEFAULT_RATIO,
    WITHIN_PANEL_A,
    NoiseModel,
)
from .records import atomic_write_text
from .simulator import CampaignSpec

# XYZ of sRGB-like primaries scaled to Y_white = 100; secondaries and grays
# are their linear combinations, matching the simulator's linear brightness.
_PRIMARIES = {
    "red": (41.24, 21.26, 1.93),
    "green": (35.76, 71.52, 11.92),
    "blue": (18.05, 7.22, 95.05),
}


def default_color_set() -> dict[str, Tristimulus]:
    """Display-like palette: primaries, secondaries, white, and three grays."""
    r, g, b = (_PRIMARIES[k] for k in ("red", "green", "blue"))
    white = tuple(x + y + z for x, y, z in zip(r, g, b))
    colors = {
        "red": r,
        "green": g,
        "blue": b,
        "cyan": tuple(x + y for x, y in zip(g, b)),
        "magenta": tuple(x + y for x, y in zip(r, b)),
        "yellow": tuple(x + y for x, y in zip(r, g)),
        "white": white,
        "gray25": tuple(0.25 * x for x in white),
        "gray50": tuple(0.50 * x for x in white),
        "gray75": tuple(0.75 * x for x in white),
    }
    return {cid: Tristimulus(*xyz) for cid, xyz in colors.items()}


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a reproducible pipeline run needs besides the input data."""

    seed: int = 1234
    n_panels: int = 13
    repeats_per_color: int = 12
    brightness_levels: tuple[float, ...] = (1.0,)
    colors: dict[str, Tristimulus] = field(default_factory=default_color_set)
    within_a: float = WITHIN_PANEL_A
    between_a: float = BETWEEN_PANEL_A
    ratio: float = DEFAULT_RATIO
    fit_colors: tuple[str, ...] = ("red", "green", "blue", "white")
    holdout_colors: tuple[str, ...] = ("cyan", "magenta", "yellow")
    calibration_brightness: float = 1.0
    histogram_bin_width: float = 0.25
    histogram_max: float = 10.0
    emit_svg: bool = False

    def __post_init__(self):
        if len(self.fit_colors) < 3:
            raise ValidationError(
                f"calibration fit set needs >= 3 colors, got {list(self.fit_colors)}")
        missing = [c for c in (*self.fit_colors, *self.holdout_colors)
                   if c not in self.colors]
        if missing:
            raise ValidationError(f"calibration colors not in the color set: {missing}")
        if not (0 < self.calibration_brightness <= 1):
            raise ValidationError(
                f"calibration_brightness must be in (0, 1], got {self.calibration_brightness}")
        # Constructing the models and campaign validates the numeric fields.
        self.campaign_spec()

    def within_model(self) -> NoiseModel:
        return NoiseModel(a=self.within_a, ratio=self.ratio, provenance="within_panel")

    def between_model(self) -> NoiseModel:
        return NoiseModel(a=self.between_a, ratio=self.ratio, provenance="between_panel")

    def campaign_spec(self) -> CampaignSpec:
        return CampaignSpec(
            n_panels=self.n_panels,
            repeats_per_color=self.repeats_per_color,
            colors=self.colors,
            brightness_levels=self.brightness_levels,
            seed=self.seed,
            within_model=self.within_model(),
            between_model=self.between_model(),
        )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_panels": self.n_panels,
            "repeats_per_color": self.repeats_per_color,
            "brightness_levels": list(self.brightness_levels),
            "colors": {cid: [c.X, c.Y, c.Z] for cid, c in sorted(self.colors.items())},
            "within_a": self.within_a,
            "between_a": self.between_a,
            "ratio": self.ratio,
            "fit_colors": list(self.fit_colors),
            "holdout_colors": list(self.holdout_colors),
            "calibration_brightness": self.calibration_brightness,
            "histogram_bin_width": self.histogram_bin_width,
            "histogram_max": self.histogram_max,
            "emit_svg": self.emit_svg,
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_overrides(self, **kwargs) -> "ScenarioConfig":
        return replace(self, **kwargs)


def _config_from_dict(data: dict, path: str) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ParseError("config root must be a JSON object", path=path)
    known = set(ScenarioConfig().to_dict())
    unknown = set(data) - known
    if unknown:
        raise ParseError(f"unknown config keys: {sorted(unknown)}", path=path)
    kwargs: dict = {}
    for key, value in data.items():
        if key == "colors":
            try:
                kwargs["colors"] = {cid: Tristimulus(*xyz) for cid, xyz in value.items()}
            except (TypeError, ValidationError) as exc:
                raise ParseError(f"bad color entry: {exc}", path=path) from exc
        elif key in ("brightness_levels", "fit_colors", "holdout_colors"):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    try:
        return ScenarioConfig(**kwargs)
    except TypeError as exc:
        raise ParseError(f"bad config value: {exc}", path=path) from exc


def load_config(path: str | Path) -> ScenarioConfig:
    """Load a scenario config from JSON, validating field names and values."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", path=str(path), line=exc.lineno) from exc
    return _config_from_dict(data, str(path))


def save_config(path: str | Path, config: ScenarioConfig) -> None:
    atomic_write_text(path, json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
