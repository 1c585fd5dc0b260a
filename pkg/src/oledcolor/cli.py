"""Command-line surface tying the modules into reproducible pipelines.

Subcommands: simulate, fit-noise, analyze, calibrate, evaluate, report.
Exit codes: 0 ok, 2 parse error (including bad usage), 3 validation error,
4 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, calibration
from .config import ScenarioConfig, load_config
from .errors import NumericalError, ParseError, ValidationError
from .formats import (
    read_calibration_matrix,
    read_external_histogram,
    read_noise_model,
    write_calibration_matrix,
    write_noise_model,
)
from .noise_model import fit_noise_model_detailed, within_panel_model
from .records import atomic_write_text, read_measurements, write_measurements
from .simulator import run_campaign

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4


def _write_csv(path: Path, rows) -> None:
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="\n").writerows(rows)
    atomic_write_text(path, buffer.getvalue())


def _load_scenario(args) -> ScenarioConfig:
    config = load_config(args.config) if args.config else ScenarioConfig()
    overrides = {}
    if getattr(args, "panels", None) is not None:
        overrides["n_panels"] = args.panels
    if getattr(args, "repeats", None) is not None:
        overrides["repeats_per_color"] = args.repeats
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return config.with_overrides(**overrides) if overrides else config


def _split_colors(raw: str) -> list[str]:
    colors = [c.strip() for c in raw.split(",") if c.strip()]
    if not colors:
        raise ValidationError(f"no color ids in {raw!r}")
    return colors


def cmd_simulate(args) -> int:
    config = _load_scenario(args)
    records = run_campaign(config.campaign_spec())
    write_measurements(args.out, records)
    print(f"wrote {len(records)} records to {args.out} "
          f"(seed {config.seed}, config {config.config_hash()[:12]})")
    return EXIT_OK


def _directional_std_rows(stds) -> list[list[str]]:
    rows = [["panel_id", "color_id", "sum_xyz", "sigma_v1", "sigma_v2", "sigma_v3",
             "sample_count"]]
    for s in stds:
        rows.append([s.panel_id, s.color_id, repr(s.sum_xyz), repr(s.sigma_v1),
                     repr(s.sigma_v2), repr(s.sigma_v3), str(s.sample_count)])
    return rows


def cmd_fit_noise(args) -> int:
    records = read_measurements(args.input)
    if args.scope == "within":
        stds = []
        for dataset in analysis.panel_datasets(records):
            stds.extend(analysis.within_panel_directional_stds(dataset))
        if not stds:
            raise ValidationError(
                "no (panel, color, brightness) group has >= 2 repeats; "
                "cannot fit a within-panel model")
    else:
        stds = analysis.between_panel_std(records)
    fit = fit_noise_model_detailed(stds)
    metadata = {
        "scope": args.scope,
        "k_v1": fit.k_v1.k,
        "k_v2": fit.k_v2.k,
        "k_v3": fit.k_v3.k,
        "residual_rms_v1": fit.k_v1.residual_rms,
        "residual_rms_v2": fit.k_v2.residual_rms,
        "residual_rms_v3": fit.k_v3.residual_rms,
        "n_points": fit.k_v1.n,
    }
    write_noise_model(args.out, fit.model, metadata)
    print(f"fitted {args.scope} model: a = {fit.model.a:.6g}, "
          f"ratio = {fit.model.ratio:.4g} (n = {fit.k_v1.n}) -> {args.out}")
    return EXIT_OK


def _histogram_rows(hist) -> list[list[str]]:
    rows = [["bin_low", "bin_high", "count"]]
    for low, high, count in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts):
        rows.append([repr(float(low)),
                     "inf" if np.isinf(high) else repr(float(high)),
                     str(count)])
    return rows


def cmd_analyze(args) -> int:
    records = read_measurements(args.input)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    datasets = analysis.panel_datasets(records)
    summary_lines = [f"panels: {len(datasets)}", f"records: {len(records)}"]

    within_stds = []
    for dataset in datasets:
        within_stds.extend(analysis.within_panel_directional_stds(dataset))
    if within_stds:
        _write_csv(outdir / "within_stds.csv", _directional_std_rows(within_stds))
        k_table = analysis.panel_k_table(datasets)
        _write_csv(outdir / "k_table.csv", k_table.csv_rows())
        summary_lines.append(
            "within-panel k x1000 means: "
            + ", ".join(f"{d} = {k_table.mean[d]:.3g}" for d in ("v1", "v2", "v3")))
    else:
        summary_lines.append("within-panel stats skipped: no group has >= 2 repeats")

    panel_ids = {rec.panel_id for rec in records}
    between_stds = []
    if len(panel_ids) >= 2:
        between_stds = analysis.between_panel_std(records)
        _write_csv(outdir / "between_stds.csv", _directional_std_rows(between_stds))
        fitted = fit_noise_model_detailed(between_stds).model
        flagged = analysis.flag_perpendicular_outliers(between_stds, fitted)
        if flagged:
            summary_lines.append(
                "colors with perpendicular std > 2x model prediction: "
                + ", ".join(flagged))

    if all(rec.timestamp is not None for rec in records):
        trend_rows = [["panel_id", "color_id", "brightness", "slope_per_s", "p_value",
                       "significant_5pct"]]
        significant = 0
        total = 0
        for dataset in datasets:
            for (color_id, brightness) in sorted(dataset.groups):
                if len(dataset.groups[(color_id, brightness)]) < 3:
                    continue
                series = analysis.time_series(dataset, color_id, brightness)
                total += 1
                significant += int(series.significant_trend)
                trend_rows.append([dataset.panel_id, color_id, repr(brightness),
                                   repr(series.slope), repr(series.p_value),
                                   str(series.significant_trend)])
        if total:
            _write_csv(outdir / "trends.csv", trend_rows)
            summary_lines.append(
                f"trend check: {significant} of {total} series significant at 5%")
    else:
        summary_lines.append("trend check skipped: records lack timestamps")

    hists = []
    repeats_available = any(len(g) >= 2 for ds in datasets for g in ds.groups.values())
    if repeats_available:
        within_hist = analysis.delta_e_histogram(
            records, "within_region", bin_width=args.bin_width, max_edge=args.max_edge)
        _write_csv(outdir / "delta_e_within.csv", _histogram_rows(within_hist))
        summary_lines.append(
            f"delta E within-region: mean {within_hist.mean:.3f} "
            f"(n = {within_hist.sample_count})")
        hists.append(within_hist)
    if len(panel_ids) >= 2:
        between_hist = analysis.delta_e_histogram(
            records, "between_panels", bin_width=args.bin_width, max_edge=args.max_edge)
        _write_csv(outdir / "delta_e_between.csv", _histogram_rows(between_hist))
        summary_lines.append(
            f"delta E between-panels: mean {between_hist.mean:.3f} "
            f"(n = {between_hist.sample_count})")
        hists.append(between_hist)
    if args.external_histogram:
        external = read_external_histogram(args.external_histogram)
        summary_lines.append(
            f"external between-regions histogram: mean {external.mean:.3f} "
            f"(n = {external.sample_count})")
        hists.append(external)
    summary_lines.append(
        "note: delta E uses the data-driven reference white (measured white if "
        "present, else the brightest color)")

    if args.svg:
        from . import plots

        if within_stds:
            plots.save_directional_std_svg(within_stds, outdir / "within_stds.svg",
                                           title="Within-panel directional std")
        if between_stds:
            plots.save_directional_std_svg(between_stds, outdir / "between_stds.svg",
                                           title="Between-panel directional std")
        if hists:
            plots.save_delta_e_histogram_svg(hists, outdir / "delta_e.svg")

    atomic_write_text(outdir / "summary.txt", "\n".join(summary_lines) + "\n")
    print("\n".join(summary_lines))
    print(f"analysis written to {outdir}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    records = read_measurements(args.input)
    colors = _split_colors(args.colors)
    pairs = calibration.pairs_from_records(
        records, args.source_panel, args.reference_panel, colors,
        brightness=args.brightness, aggregate=args.aggregate)
    model = read_noise_model(args.model)[0] if args.model else within_panel_model()
    calib = calibration.fit_matrix(pairs, model, weighting=args.weighting)
    write_calibration_matrix(args.out, calib)
    print(f"fitted {args.weighting} matrix on {len(pairs)} colors "
          f"(condition {calib.condition_number:.3e}) -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    records = read_measurements(args.input)
    colors = _split_colors(args.colors)
    holdout = calibration.pairs_from_records(
        records, args.source_panel, args.reference_panel, colors,
        brightness=args.brightness, aggregate=args.aggregate)
    rows = [["matrix", "weighting", *colors, "mean_abs_error"]]
    for matrix_path in args.matrix:
        calib = read_calibration_matrix(matrix_path)
        result = calibration.evaluate(calib, holdout)
        rows.append([str(matrix_path), calib.weighting,
                     *(f"{result.per_color_mean[c]:.6g}" for c in colors),
                     f"{result.mean_abs_error:.6g}"])
    widths = [max(len(str(row[i])) for row in rows) for i in range(len(rows[0]))]
    for row in rows:
        print("  ".join(str(cell).ljust(w) for cell, w in zip(row, widths)))
    if args.out:
        _write_csv(Path(args.out), rows)
    return EXIT_OK


def cmd_report(args) -> int:
    config = _load_scenario(args)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    records = run_campaign(config.campaign_spec())
    write_measurements(outdir / "measurements.csv", records)
    datasets = analysis.panel_datasets(records)
    lines = [
        "# Measurement campaign report",
        "",
        f"- config hash: `{config.config_hash()}`",
        f"- seed: {config.seed}",
        f"- records: {len(records)} ({config.n_panels} panels x "
        f"{len(config.colors)} colors x {len(config.brightness_levels)} brightness "
        f"levels x {config.repeats_per_color} repeats)",
        "",
    ]

    lines.append("## Within-panel noise fit")
    lines.append("")
    if config.repeats_per_color >= 2:
        stds = []
        for dataset in datasets:
            stds.extend(analysis.within_panel_directional_stds(dataset))
        fit = fit_noise_model_detailed(stds)
        write_noise_model(outdir / "noise_model_within.txt", fit.model,
                          {"scope": "within", "k_v1": fit.k_v1.k, "k_v2": fit.k_v2.k,
                           "k_v3": fit.k_v3.k, "n_points": fit.k_v1.n})
        k_table = analysis.panel_k_table(datasets)
        _write_csv(outdir / "k_table.csv", k_table.csv_rows())
        lines.append(f"- fitted a = {fit.model.a:.6g} (configured {config.within_a:.6g})")
        lines.append(f"- fitted ratio = {fit.model.ratio:.4g} "
                     f"(configured {config.ratio:.4g}); fitted ratios are reported, "
                     "not forced to the configured value")
        lines.append("- per-direction k x1000 means across panels: "
                     + ", ".join(f"{d} = {k_table.mean[d]:.3g}" for d in ("v1", "v2", "v3")))
        within_k_v1 = fit.k_v1.k
    else:
        lines.append("- skipped: campaign has a single repeat per color")
        within_k_v1 = None
    lines.append("")

    lines.append("## Between-panel noise fit")
    lines.append("")
    if config.n_panels >= 2:
        between_stds = analysis.between_panel_std(records)
        bfit = fit_noise_model_detailed(between_stds)
        write_noise_model(outdir / "noise_model_between.txt", bfit.model,
                          {"scope": "between", "k_v1": bfit.k_v1.k, "k_v2": bfit.k_v2.k,
                           "k_v3": bfit.k_v3.k, "n_points": bfit.k_v1.n})
        _write_csv(outdir / "between_stds.csv", _directional_std_rows(between_stds))
        lines.append(f"- fitted a = {bfit.model.a:.6g} (configured {config.between_a:.6g})")
        lines.append(f"- fitted ratio = {bfit.model.ratio:.4g}")
        if within_k_v1:
            lines.append(f"- between/within k_v1 factor: {bfit.k_v1.k / within_k_v1:.2f}")
    else:
        lines.append("- skipped: single panel")
    lines.append("")

    lines.append("## Delta E")
    lines.append("")
    if config.repeats_per_color >= 2:
        within_hist = analysis.delta_e_histogram(
            records, "within_region", bin_width=config.histogram_bin_width,
            max_edge=config.histogram_max)
        _write_csv(outdir / "delta_e_within.csv", _histogram_rows(within_hist))
        lines.append(f"- within-region mean: {within_hist.mean:.3f}")
    else:
        within_hist = None
    if config.n_panels >= 2:
        between_hist = analysis.delta_e_histogram(
            records, "between_panels", bin_width=config.histogram_bin_width,
            max_edge=config.histogram_max)
        _write_csv(outdir / "delta_e_between.csv", _histogram_rows(between_hist))
        lines.append(f"- between-panels mean: {between_hist.mean:.3f}")
        if within_hist is not None:
            ordering = "holds" if within_hist.mean < between_hist.mean else "VIOLATED"
            lines.append(f"- within < between ordering: {ordering}")
    lines.append("- reference white: data-driven (measured white at top brightness); "
                 "a just-noticeable difference is about 2.3")
    lines.append("")

    lines.append("## Calibration")
    lines.append("")
    panel_ids = sorted({rec.panel_id for rec in records})
    if config.n_panels >= 2 and len(config.holdout_colors) >= 1:
        reference = panel_ids[0]
        fit_desc = ",".join(config.fit_colors)
        holdout_desc = ",".join(config.holdout_colors)
        lines.append(f"- fit colors: {fit_desc}; holdout: {holdout_desc}; "
                     f"brightness {config.calibration_brightness}; reference {reference}")
        eval_rows = [["source_panel", "weighting", "mean_abs_error"]]
        wins = 0
        total = 0
        for source in panel_ids[1:]:
            fit_pairs = calibration.pairs_from_records(
                records, source, reference, config.fit_colors,
                brightness=config.calibration_brightness)
            holdout_pairs = calibration.pairs_from_records(
                records, source, reference, config.holdout_colors,
                brightness=config.calibration_brightness)
            results = {}
            for weighting in ("proposed", "uniform"):
                calib = calibration.fit_matrix(fit_pairs, config.within_model(),
                                               weighting=weighting)
                write_calibration_matrix(
                    outdir / f"matrix_{source}_{weighting}.txt", calib)
                results[weighting] = calibration.evaluate(calib, holdout_pairs)
                eval_rows.append([source, weighting,
                                  f"{results[weighting].mean_abs_error:.6g}"])
            total += 1
            wins += int(results["proposed"].mean_abs_error
                        < results["uniform"].mean_abs_error)
        _write_csv(outdir / "evaluation.csv", eval_rows)
        lines.append(f"- proposed weighting beats uniform on {wins} of {total} "
                     "source panels (holdout mean absolute XYZ error)")
    else:
        lines.append("- skipped: needs >= 2 panels")
    lines.append("")

    if config.emit_svg:
        from . import plots

        if config.repeats_per_color >= 2:
            within_all = []
            for dataset in datasets:
                within_all.extend(analysis.within_panel_directional_stds(dataset))
            plots.save_directional_std_svg(within_all, outdir / "within_stds.svg",
                                           title="Within-panel directional std")
        hists = [h for h in (within_hist,
                             between_hist if config.n_panels >= 2 else None) if h]
        if hists:
            plots.save_delta_e_histogram_svg(hists, outdir / "delta_e.svg")

    atomic_write_text(outdir / "report.md", "\n".join(lines) + "\n")
    print("\n".join(lines))
    print(f"report written to {outdir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oledcolor",
        description="Model anisotropic XYZ measurement noise of displays and "
                    "run weighted least-squares cross-display calibration.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic measurement campaign CSV")
    p.add_argument("--config", help="scenario config JSON")
    p.add_argument("--panels", type=int, help="override panel count")
    p.add_argument("--repeats", type=int, help="override repeats per color")
    p.add_argument("--seed", type=int, help="override campaign seed")
    p.add_argument("--out", required=True, help="output measurement CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-noise", help="fit the noise model from measurements")
    p.add_argument("--input", required=True, help="measurement CSV")
    p.add_argument("--scope", choices=["within", "between"], default="within",
                   help="fit repeats within panels or variation between panels")
    p.add_argument("--out", required=True, help="output model file")
    p.set_defaults(func=cmd_fit_noise)

    p = sub.add_parser("analyze", help="campaign statistics: k table, std curves, "
                                       "trends, delta E histograms")
    p.add_argument("--input", required=True, help="measurement CSV")
    p.add_argument("--outdir", required=True, help="output directory")
    p.add_argument("--bin-width", type=float, default=0.25, help="delta E bin width")
    p.add_argument("--max-edge", type=float, default=10.0,
                   help="last finite delta E bin edge (overflow bin beyond)")
    p.add_argument("--external-histogram",
                   help="optional external delta E histogram CSV to compare against")
    p.add_argument("--svg", action="store_true", help="emit SVG plots")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("calibrate", help="fit a 3x3 calibration matrix between panels")
    p.add_argument("--input", required=True, help="measurement CSV")
    p.add_argument("--source-panel", required=True)
    p.add_argument("--reference-panel", required=True)
    p.add_argument("--colors", default="red,green,blue,white",
                   help="comma-separated fit color ids")
    p.add_argument("--brightness", type=float, default=1.0)
    p.add_argument("--aggregate", choices=["mean", "first"], default="mean",
                   help="how to combine repeated measurements")
    p.add_argument("--weighting", choices=["proposed", "uniform"], default="proposed")
    p.add_argument("--model", help="noise model file (default: within-panel constants)")
    p.add_argument("--out", required=True, help="output matrix file")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="holdout errors of one or more matrices")
    p.add_argument("--input", required=True, help="measurement CSV")
    p.add_argument("--matrix", action="append", required=True,
                   help="matrix file; repeat for side-by-side comparison")
    p.add_argument("--source-panel", required=True)
    p.add_argument("--reference-panel", required=True)
    p.add_argument("--colors", default="cyan,magenta,yellow",
                   help="comma-separated holdout color ids")
    p.add_argument("--brightness", type=float, default=1.0)
    p.add_argument("--aggregate", choices=["mean", "first"], default="mean")
    p.add_argument("--out", help="optional output CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="full pipeline: simulate, fit, analyze, "
                                      "calibrate, evaluate")
    p.add_argument("--config", help="scenario config JSON")
    p.add_argument("--panels", type=int, help="override panel count")
    p.add_argument("--repeats", type=int, help="override repeats per color")
    p.add_argument("--seed", type=int, help="override campaign seed")
    p.add_argument("--outdir", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    parser.add_argument("--verbose", action="store_true", help="log at INFO level")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
