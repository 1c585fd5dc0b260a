"""Monte-Carlo generator of synthetic measurement campaigns.

Two noise layers mirror how real panels behave: a static per-panel offset
drawn once per color (between-panel model, default a = 1/400) and temporal
noise added to every measurement (within-panel model, default a = 1/2000).
Both draw zero-mean Gaussians with the anisotropic model covariance; the
Gaussian is the maximum-entropy choice for a model specified only through
its covariance.

Reproducibility: every panel gets its own RNG substream spawned from the
campaign seed, so identical specs produce bit-identical record streams and
panels can be generated concurrently without changing the output.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .colorspace import Tristimulus
from .errors import DegenerateColorError, UnknownColorError, ValidationError
from .noise_model import (
    NoiseModel,
    between_panel_model,
    covariance_factor,
    within_panel_model,
)
from .records import MeasurementRecord

logger = logging.getLogger(__name__)

# Spacing of synthetic timestamps within one panel's measurement sequence.
MEASUREMENT_INTERVAL_S = 5.0


@dataclass
class ClampCounter:
    """Counts negative components clamped to zero during sampling.

    Clamping keeps tristimulus values non-negative; at realistic noise
    scales the event is vanishingly rare, and the counter makes any
    distortion observable instead of silent.
    """

    clamped: int = 0
    total: int = 0


def _clamp_nonnegative(arr: np.ndarray, counter: ClampCounter | None) -> np.ndarray:
    negatives = int(np.count_nonzero(arr < 0))
    if counter is not None:
        counter.clamped += negatives
        counter.total += arr.size
    if negatives:
        arr = np.maximum(arr, 0.0)
    return arr


@dataclass(frozen=True)
class PanelSpec:
    """One simulated panel: its noise-free outputs and the two noise models."""

    panel_id: str
    true_colors: Mapping[str, Tristimulus]
    static_offset_model: NoiseModel
    temporal_model: NoiseModel

    def __post_init__(self):
        if not self.true_colors:
            raise ValidationError("panel needs at least one color")
        for cid, color in self.true_colors.items():
            if color.total <= 0:
                raise DegenerateColorError(f"panel color {cid!r} must have X+Y+Z > 0")


@dataclass(frozen=True)
class CampaignSpec:
    """Shape of a simulated campaign; deterministic given the seed."""

    n_panels: int
    repeats_per_color: int
    colors: Mapping[str, Tristimulus]
    brightness_levels: tuple[float, ...] = (1.0,)
    seed: int = 0
    within_model: NoiseModel = field(default_factory=within_panel_model)
    between_model: NoiseModel = field(default_factory=between_panel_model)

    def __post_init__(self):
        if self.n_panels < 1:
            raise ValidationError(f"n_panels must be >= 1, got {self.n_panels}")
        if self.repeats_per_color < 1:
            raise ValidationError(f"repeats_per_color must be >= 1, got {self.repeats_per_color}")
        if not self.colors:
            raise ValidationError("campaign needs at least one color")
        for cid, color in self.colors.items():
            if color.total <= 0:
                raise DegenerateColorError(f"campaign color {cid!r} must have X+Y+Z > 0")
        levels = tuple(float(b) for b in self.brightness_levels)
        if not levels:
            raise ValidationError("campaign needs at least one brightness level")
        for b in levels:
            if not (math.isfinite(b) and 0 < b <= 1):
                raise ValidationError(f"brightness levels must be in (0, 1], got {b!r}")
        object.__setattr__(self, "brightness_levels", levels)


def sample_panel(population_means: Mapping[str, Tristimulus], spec: CampaignSpec,
                 rng: np.random.Generator, panel_id: str = "P01",
                 counter: ClampCounter | None = None) -> PanelSpec:
    """Draw one panel: population mean plus a static per-color offset.

    The offset is drawn once per color from the between-panel covariance and
    stays fixed for the panel's lifetime. Offsets of different colors are
    independent draws. Colors are processed in sorted id order so the result
    depends only on the RNG state, not mapping order.
    """
    true_colors: dict[str, Tristimulus] = {}
    for color_id in sorted(population_means):
        mean = population_means[color_id]
        factor = covariance_factor(spec.between_model, mean)
        xyz = mean.as_array() + factor @ rng.standard_normal(3)
        xyz = _clamp_nonnegative(xyz, counter)
        if xyz.sum() <= 0:
            raise DegenerateColorError(
                f"sampled panel color {color_id!r} degenerated to zero; "
                "between-panel noise scale is implausibly large")
        true_colors[color_id] = Tristimulus.from_array(xyz)
    return PanelSpec(
        panel_id=panel_id,
        true_colors=true_colors,
        static_offset_model=spec.between_model,
        temporal_model=spec.within_model,
    )


def sample_measurements(panel: PanelSpec, color_id: str, rng: np.random.Generator,
                        n: int, brightness: float = 1.0,
                        counter: ClampCounter | None = None) -> np.ndarray:
    """Draw n noisy measurements of one panel color as an (n, 3) array.

    Brightness scales the true color linearly before noise; the covariance
    is evaluated at the scaled color, since the model depends only on the
    measured XYZ.
    """
    if color_id not in panel.true_colors:
        raise UnknownColorError(
            f"color {color_id!r} not in panel {panel.panel_id!r}; "
            f"known: {sorted(panel.true_colors)}")
    base = panel.true_colors[color_id].scaled(brightness)
    factor = covariance_factor(panel.temporal_model, base)
    draws = base.as_array() + rng.standard_normal((n, 3)) @ factor.T
    return _clamp_nonnegative(draws, counter)


def sample_measurement(panel: PanelSpec, color_id: str, rng: np.random.Generator,
                       brightness: float = 1.0,
                       counter: ClampCounter | None = None) -> Tristimulus:
    """Draw a single noisy measurement of one panel color."""
    xyz = sample_measurements(panel, color_id, rng, 1, brightness=brightness,
                              counter=counter)[0]
    return Tristimulus.from_array(xyz)


def campaign_panel_ids(spec: CampaignSpec) -> list[str]:
    return [f"P{i + 1:02d}" for i in range(spec.n_panels)]


def run_campaign(spec: CampaignSpec) -> list[MeasurementRecord]:
    """Generate the full record stream: panels x repeats x brightness x colors.

    Measurement order within a panel is repeat-major, so successive visits
    to the same color are spread across the synthetic timeline the way a
    real test sequence would be.
    """
    counter = ClampCounter()
    records: list[MeasurementRecord] = []
    panel_seeds = np.random.SeedSequence(spec.seed).spawn(spec.n_panels)
    for panel_id, seed in zip(campaign_panel_ids(spec), panel_seeds):
        rng = np.random.default_rng(seed)
        panel = sample_panel(spec.colors, spec, rng, panel_id=panel_id, counter=counter)
        tick = 0
        for repeat in range(spec.repeats_per_color):
            for brightness in spec.brightness_levels:
                for color_id in sorted(spec.colors):
                    m = sample_measurement(panel, color_id, rng, brightness=brightness,
                                           counter=counter)
                    records.append(MeasurementRecord(
                        panel_id=panel_id,
                        color_id=color_id,
                        brightness=brightness,
                        repeat_index=repeat,
                        timestamp=tick * MEASUREMENT_INTERVAL_S,
                        X=m.X, Y=m.Y, Z=m.Z,
                    ))
                    tick += 1
    if counter.clamped:
        logger.warning("campaign clamped %d of %d sampled components to zero",
                       counter.clamped, counter.total)
    return records
