"""Campaign-level statistics over measurement records.

Covers the per-panel k-factor table, cross-panel directional std curves,
time-series trend checks, and delta E histograms grouped within a panel
region or between panels.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
import scipy.stats

from .colorspace import Tristimulus, delta_e76, xyz_matrix, xyz_to_lab
from .errors import (
    EmptyInputError,
    InsufficientRepeatsError,
    MissingTimestampsError,
    TooFewPanelsError,
    UnknownColorError,
    ValidationError,
)
from .noise_model import (
    Direction,
    DirectionalStd,
    FitResult,
    NoiseModel,
    directional_stats,
    fit_k,
)
from .records import MeasurementRecord

logger = logging.getLogger(__name__)

Grouping = Literal["within_region", "between_panels", "external_between_regions"]

GroupKey = tuple[str, float]  # (color_id, brightness)

DEFAULT_BIN_WIDTH = 0.25
DEFAULT_MAX_EDGE = 10.0


@dataclass(frozen=True)
class PanelDataset:
    """All records of one panel, grouped by (color_id, brightness)."""

    panel_id: str
    groups: dict[GroupKey, tuple[MeasurementRecord, ...]]

    def __post_init__(self):
        if not self.groups:
            raise ValidationError(f"panel {self.panel_id!r} has no records")
        for key, group in self.groups.items():
            if not group:
                raise ValidationError(f"panel {self.panel_id!r} group {key} is empty")

    def group_xyz(self, key: GroupKey) -> np.ndarray:
        return xyz_matrix([rec.tristimulus() for rec in self.groups[key]])


def panel_datasets(records: Iterable[MeasurementRecord]) -> list[PanelDataset]:
    """Split a record stream into per-panel datasets, sorted by panel id."""
    by_panel: dict[str, dict[GroupKey, list[MeasurementRecord]]] = {}
    for rec in records:
        by_panel.setdefault(rec.panel_id, {}).setdefault(
            (rec.color_id, rec.brightness), []).append(rec)
    if not by_panel:
        raise EmptyInputError("no measurement records")
    return [
        PanelDataset(panel_id=pid,
                     groups={key: tuple(group) for key, group in groups.items()})
        for pid, groups in sorted(by_panel.items())
    ]


def within_panel_directional_stds(dataset: PanelDataset,
                                  min_repeats: int = 2) -> list[DirectionalStd]:
    """Directional stds of each (color, brightness) group with enough repeats.

    Groups below min_repeats are skipped; callers that need every group use
    panel_k_table, which reports offenders.
    """
    stds = []
    for (color_id, brightness), group in sorted(dataset.groups.items()):
        if len(group) < min_repeats:
            continue
        stds.append(directional_stats(
            [rec.tristimulus() for rec in group],
            color_id=color_id, panel_id=dataset.panel_id))
    return stds


@dataclass(frozen=True)
class KTable:
    """Per-panel k x 1000 for each direction, with cross-panel mean and std."""

    panel_ids: tuple[str, ...]
    k1000: dict[Direction, tuple[float, ...]]
    mean: dict[Direction, float]
    std: dict[Direction, float]
    fits: dict[str, dict[Direction, FitResult]]  # panel id -> direction -> fit

    def csv_rows(self) -> list[list[str]]:
        header = ["direction", *self.panel_ids, "mean", "std"]
        rows = [header]
        for direction in ("v1", "v2", "v3"):
            rows.append([
                direction,
                *(f"{v:.6g}" for v in self.k1000[direction]),
                f"{self.mean[direction]:.6g}",
                f"{self.std[direction]:.6g}",
            ])
        return rows


def panel_k_table(datasets: Sequence[PanelDataset], min_repeats: int = 2) -> KTable:
    """Fit k per panel per direction from mean-anchored directional stds.

    A panel with no (color, brightness) group of at least min_repeats
    measurements cannot contribute; the error lists the offending groups.
    """
    if not datasets:
        raise EmptyInputError("k table needs at least one panel dataset")
    per_panel: dict[str, dict[Direction, FitResult]] = {}
    for ds in datasets:
        stds = within_panel_directional_stds(ds, min_repeats=min_repeats)
        if not stds:
            offenders = [f"{key}: {len(group)} repeat(s)"
                         for key, group in sorted(ds.groups.items())]
            raise InsufficientRepeatsError(
                f"panel {ds.panel_id!r} has no group with >= {min_repeats} repeats; "
                + "; ".join(offenders))
        per_panel[ds.panel_id] = {
            d: fit_k([(s.sum_xyz, s.sigma(d)) for s in stds], direction_label=d)
            for d in ("v1", "v2", "v3")
        }
    panel_ids = tuple(sorted(per_panel))
    k1000: dict[Direction, tuple[float, ...]] = {}
    mean: dict[Direction, float] = {}
    std: dict[Direction, float] = {}
    for d in ("v1", "v2", "v3"):
        values = tuple(per_panel[pid][d].k * 1000.0 for pid in panel_ids)
        k1000[d] = values
        mean[d] = float(np.mean(values))
        std[d] = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return KTable(panel_ids=panel_ids, k1000=k1000, mean=mean, std=std, fits=per_panel)


def _first_repeat(group: Sequence[MeasurementRecord]) -> MeasurementRecord:
    return min(group, key=lambda rec: (rec.repeat_index,
                                       math.inf if rec.timestamp is None else rec.timestamp))


def between_panel_std(records: Iterable[MeasurementRecord],
                      min_panels: int = 2) -> list[DirectionalStd]:
    """Directional stds of one measurement per panel, per (color, brightness).

    Pools the first repeat from every panel, anchors the frame at the
    cross-panel mean, and returns one DirectionalStd per group (panel id
    "pooled"). When panels carry repeats, only the first is used.
    """
    groups: dict[GroupKey, dict[str, list[MeasurementRecord]]] = {}
    for rec in records:
        groups.setdefault((rec.color_id, rec.brightness), {}).setdefault(
            rec.panel_id, []).append(rec)
    if not groups:
        raise EmptyInputError("no measurement records")
    discarded = 0
    stds = []
    for (color_id, brightness), per_panel in sorted(groups.items()):
        n_panels = len(per_panel)
        if n_panels < min_panels:
            raise TooFewPanelsError(
                f"color {color_id!r} at brightness {brightness} seen on {n_panels} "
                f"panel(s); between-panel stds need >= {min_panels}")
        picks = []
        for panel_id in sorted(per_panel):
            panel_group = per_panel[panel_id]
            discarded += len(panel_group) - 1
            picks.append(_first_repeat(panel_group).tristimulus())
        stds.append(directional_stats(picks, color_id=color_id, panel_id="pooled"))
    if discarded:
        logger.info("between-panel stds used the first repeat per panel; "
                    "%d additional repeats ignored", discarded)
    return stds


def flag_perpendicular_outliers(stds: Sequence[DirectionalStd], model: NoiseModel,
                                factor: float = 2.0) -> list[str]:
    """Color ids whose v2 or v3 std exceeds factor times the model prediction.

    The model predicts a perpendicular std of a * (X+Y+Z); colors beyond the
    threshold behave unlike the isotropic-perpendicular assumption (greens
    tend to show up here).
    """
    flagged = sorted({
        s.color_id for s in stds
        if max(s.sigma_v2, s.sigma_v3) > factor * model.a * s.sum_xyz
    })
    return flagged


@dataclass(frozen=True)
class TimeSeries:
    """X+Y+Z of one color over time, with an OLS trend check."""

    color_id: str
    timestamps: tuple[float, ...]
    sums: tuple[float, ...]
    slope: float
    p_value: float

    @property
    def significant_trend(self) -> bool:
        """True when the slope differs from zero at the 5% level."""
        return math.isfinite(self.p_value) and self.p_value < 0.05


def time_series(dataset: PanelDataset, color_id: str,
                brightness: float | None = None) -> TimeSeries:
    """Ordered (timestamp, X+Y+Z) series of one color plus its linear trend."""
    keys = [key for key in dataset.groups if key[0] == color_id
            and (brightness is None or key[1] == brightness)]
    if not keys:
        raise UnknownColorError(
            f"color {color_id!r} (brightness {brightness}) not in panel "
            f"{dataset.panel_id!r}")
    levels = {key[1] for key in keys}
    if len(levels) > 1:
        raise ValidationError(
            f"color {color_id!r} was measured at brightness levels {sorted(levels)}; "
            "pass an explicit brightness")
    recs = [rec for key in keys for rec in dataset.groups[key]]
    if any(rec.timestamp is None for rec in recs):
        raise MissingTimestampsError(
            f"records of color {color_id!r} on panel {dataset.panel_id!r} "
            "lack timestamps")
    recs.sort(key=lambda rec: rec.timestamp)
    times = np.array([rec.timestamp for rec in recs], dtype=float)
    sums = np.array([rec.X + rec.Y + rec.Z for rec in recs], dtype=float)
    if len(recs) >= 3 and np.ptp(times) > 0 and np.ptp(sums) > 0:
        fit = scipy.stats.linregress(times, sums)
        slope, p_value = float(fit.slope), float(fit.pvalue)
    elif np.ptp(sums) == 0:
        slope, p_value = 0.0, 1.0
    else:
        slope = float(np.polyfit(times, sums, 1)[0]) if np.ptp(times) > 0 else 0.0
        p_value = float("nan")
    return TimeSeries(color_id=color_id, timestamps=tuple(times), sums=tuple(sums),
                      slope=slope, p_value=p_value)


@dataclass(frozen=True)
class DeltaEHistogram:
    """Binned CIE76 differences against group averages."""

    bin_edges: tuple[float, ...]  # len(counts) + 1 edges; last may be +inf
    counts: tuple[int, ...]
    mean: float
    grouping: Grouping
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.bin_edges) != len(self.counts) + 1:
            raise ValidationError("bin_edges must have len(counts) + 1 entries")
        if sum(self.counts) != len(self.values):
            raise ValidationError("histogram counts must sum to the sample count")

    @property
    def sample_count(self) -> int:
        return len(self.values)


def _histogram_edges(bin_width: float, max_edge: float) -> np.ndarray:
    if bin_width <= 0 or max_edge <= 0:
        raise ValidationError("bin width and max edge must be positive")
    edges = np.arange(0.0, max_edge + 0.5 * bin_width, bin_width)
    return np.append(edges, np.inf)  # overflow bin


def _bin_values(values: np.ndarray, bin_width: float, max_edge: float,
                grouping: Grouping) -> DeltaEHistogram:
    edges = _histogram_edges(bin_width, max_edge)
    counts, _ = np.histogram(values, bins=edges)
    return DeltaEHistogram(
        bin_edges=tuple(float(e) for e in edges),
        counts=tuple(int(c) for c in counts),
        mean=float(values.mean()) if values.size else 0.0,
        grouping=grouping,
        values=tuple(float(v) for v in values),
    )


def default_reference_white(records: Sequence[MeasurementRecord]) -> Tristimulus:
    """Data-driven white: mean of measured white at its highest brightness.

    Falls back to the mean of the brightest (color, brightness) group when no
    color is named "white". Reports flag that this default is a choice, not a
    measured illuminant.
    """
    recs = list(records)
    if not recs:
        raise EmptyInputError("cannot derive a reference white from no records")
    whites = [rec for rec in recs if rec.color_id.lower() == "white"]
    if whites:
        top = max(rec.brightness for rec in whites)
        chosen = [rec for rec in whites if rec.brightness == top]
    else:
        groups: dict[GroupKey, list[MeasurementRecord]] = {}
        for rec in recs:
            groups.setdefault((rec.color_id, rec.brightness), []).append(rec)
        chosen = max(groups.values(),
                     key=lambda g: float(np.mean([r.X + r.Y + r.Z for r in g])))
    xyz = xyz_matrix([rec.tristimulus() for rec in chosen]).mean(axis=0)
    return Tristimulus.from_array(xyz)


def delta_e_histogram(records: Sequence[MeasurementRecord], grouping: Grouping,
                      reference_white: Tristimulus | None = None,
                      bin_width: float = DEFAULT_BIN_WIDTH,
                      max_edge: float = DEFAULT_MAX_EDGE) -> DeltaEHistogram:
    """CIE76 differences of measurements against their group average.

    within_region: every record vs the mean of its (panel, color, brightness)
    group. between_panels: the first repeat per panel vs the cross-panel mean
    of those picks, per (color, brightness). The reference white defaults to
    the data-driven white of the record set.
    """
    recs = list(records)
    if not recs:
        raise EmptyInputError("delta E histogram needs records")
    white = reference_white if reference_white is not None else default_reference_white(recs)
    values: list[float] = []
    if grouping == "within_region":
        groups: dict[tuple[str, str, float], list[MeasurementRecord]] = {}
        for rec in recs:
            groups.setdefault((rec.panel_id, rec.color_id, rec.brightness), []).append(rec)
        for group in groups.values():
            mean_lab = xyz_to_lab(
                Tristimulus.from_array(
                    xyz_matrix([r.tristimulus() for r in group]).mean(axis=0)),
                white)
            values.extend(
                delta_e76(xyz_to_lab(r.tristimulus(), white), mean_lab) for r in group)
    elif grouping == "between_panels":
        by_key: dict[GroupKey, dict[str, list[MeasurementRecord]]] = {}
        for rec in recs:
            by_key.setdefault((rec.color_id, rec.brightness), {}).setdefault(
                rec.panel_id, []).append(rec)
        for key, per_panel in sorted(by_key.items()):
            if len(per_panel) < 2:
                raise TooFewPanelsError(
                    f"group {key} seen on {len(per_panel)} panel(s); "
                    "between-panel delta E needs >= 2")
            picks = [_first_repeat(per_panel[pid]).tristimulus()
                     for pid in sorted(per_panel)]
            mean_lab = xyz_to_lab(
                Tristimulus.from_array(xyz_matrix(picks).mean(axis=0)), white)
            values.extend(delta_e76(xyz_to_lab(p, white), mean_lab) for p in picks)
    else:
        raise ValidationError(
            f"grouping {grouping!r} is not computed from records; "
            "external histograms are loaded, not computed")
    return _bin_values(np.array(values, dtype=float), bin_width, max_edge, grouping)


def ordering_summary(within: DeltaEHistogram, between: DeltaEHistogram,
                     external: DeltaEHistogram | None = None) -> dict[str, float]:
    """Mean delta E per grouping, for the within < (regions <) between check."""
    summary = {"within_region": within.mean, "between_panels": between.mean}
    if external is not None:
        summary["external_between_regions"] = external.mean
    return summary
