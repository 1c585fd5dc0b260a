import numpy as np
import pytest

from oledcolor.calibration import (
    CalibrationMatrix,
    MeasurementPair,
    apply,
    build_design_row,
    evaluate,
    fit_matrix,
    pairs_from_records,
    wls_objective,
)
from oledcolor.colorspace import Tristimulus
from oledcolor.errors import (
    EmptyInputError,
    RankDeficiencyError,
    SingularSystemError,
    UnknownColorError,
    ValidationError,
)
from oledcolor.noise_model import NoiseModel, within_panel_model
from oledcolor.records import MeasurementRecord

MODEL = within_panel_model()

# Display-like primaries plus white for well-conditioned fits.
RGBW = {
    "red": Tristimulus(41.24, 21.26, 1.93),
    "green": Tristimulus(35.76, 71.52, 11.92),
    "blue": Tristimulus(18.05, 7.22, 95.05),
    "white": Tristimulus(95.05, 100.0, 108.9),
}


def _pairs_through(M_true, colors=RGBW):
    return [
        MeasurementPair(source=c, reference=Tristimulus.from_array(M_true @ c.as_array()),
                        color_id=cid)
        for cid, c in colors.items()
    ]


def _random_matrix(rng):
    # Near-identity map with non-negative mixing, like two panels of the
    # same type; keeps every mapped color a valid tristimulus.
    return np.eye(3) * rng.uniform(0.9, 1.1) + rng.uniform(0, 0.05, size=(3, 3))


class TestDesignRow:
    def test_unit_input_selects_first_column(self):
        H, target = build_design_row(
            MeasurementPair(Tristimulus(1, 0, 0), Tristimulus(2, 3, 4)))
        assert np.array_equal(H[0], [1, 0, 0, 0, 0, 0, 0, 0, 0])
        assert np.array_equal(H[1], [0, 0, 0, 1, 0, 0, 0, 0, 0])
        assert np.array_equal(H[2], [0, 0, 0, 0, 0, 0, 1, 0, 0])
        assert np.array_equal(target, [2, 3, 4])

    def test_block_pattern(self):
        H, _ = build_design_row(
            MeasurementPair(Tristimulus(1, 2, 3), Tristimulus(1, 1, 1)))
        expected = np.array([
            [1, 2, 3, 0, 0, 0, 0, 0, 0],
            [0, 0, 0, 1, 2, 3, 0, 0, 0],
            [0, 0, 0, 0, 0, 0, 1, 2, 3],
        ], dtype=float)
        assert np.array_equal(H, expected)

    def test_identity_reconstruction(self):
        c = Tristimulus(12.5, 30.1, 7.3)
        H, _ = build_design_row(MeasurementPair(c, c))
        assert np.allclose(H @ np.eye(3).reshape(9), c.as_array(), atol=0)


class TestFitMatrix:
    def test_self_calibration_gives_identity(self):
        pairs = [MeasurementPair(c, c, cid) for cid, c in RGBW.items()]
        calib = fit_matrix(pairs, MODEL, weighting="proposed")
        assert np.allclose(calib.M, np.eye(3), atol=1e-12)

    def test_three_pairs_interpolate_exactly_any_weighting(self):
        rng = np.random.default_rng(42)
        M_true = _random_matrix(rng)
        colors = {k: RGBW[k] for k in ("red", "green", "blue")}
        pairs = _pairs_through(M_true, colors)
        proposed = fit_matrix(pairs, MODEL, weighting="proposed")
        uniform = fit_matrix(pairs, None, weighting="uniform")
        for calib in (proposed, uniform):
            for pair in pairs:
                assert np.allclose(apply(calib, pair.source),
                                   pair.reference.as_array(), atol=1e-10)
        assert np.allclose(proposed.M, uniform.M, atol=1e-10)

    @pytest.mark.parametrize("n_colors", [4, 6, 8])
    def test_noise_free_recovery(self, n_colors):
        rng = np.random.default_rng(n_colors)
        M_true = _random_matrix(rng)
        colors = {f"c{i}": Tristimulus.from_array(rng.uniform(5, 100, 3))
                  for i in range(n_colors)}
        pairs = _pairs_through(M_true, colors)
        calib = fit_matrix(pairs, MODEL, weighting="proposed")
        assert np.allclose(calib.M, M_true, atol=1e-10)
        # Held-out color maps through the recovered matrix exactly.
        held_out = Tristimulus.from_array(rng.uniform(5, 100, 3))
        assert np.allclose(apply(calib, held_out), M_true @ held_out.as_array(),
                           atol=1e-9)

    def test_scale_multiplier_does_not_change_m(self):
        rng = np.random.default_rng(3)
        M_true = _random_matrix(rng)
        noisy_pairs = [
            MeasurementPair(
                source=c,
                reference=Tristimulus.from_array(
                    M_true @ c.as_array() + rng.normal(0, 0.05, 3)),
                color_id=cid)
            for cid, c in RGBW.items()
        ]
        small = NoiseModel(a=1 / 2000, ratio=5.0)
        large = NoiseModel(a=1 / 40, ratio=5.0)
        M_small = fit_matrix(noisy_pairs, small, weighting="proposed").M
        M_large = fit_matrix(noisy_pairs, large, weighting="proposed").M
        assert np.allclose(M_small, M_large, atol=1e-12)

    def test_reference_scaling_equivariance(self):
        rng = np.random.default_rng(11)
        M_true = _random_matrix(rng)
        pairs = _pairs_through(M_true)
        s = 3.7
        scaled_pairs = [
            MeasurementPair(p.source, p.reference.scaled(s), p.color_id) for p in pairs
        ]
        M_base = fit_matrix(pairs, MODEL, weighting="proposed").M
        M_scaled = fit_matrix(scaled_pairs, MODEL, weighting="proposed").M
        assert np.allclose(M_scaled, s * M_base, rtol=1e-10, atol=1e-12)

    def test_too_few_pairs(self):
        pairs = [MeasurementPair(RGBW["red"], RGBW["red"]),
                 MeasurementPair(RGBW["green"], RGBW["green"])]
        with pytest.raises(RankDeficiencyError):
            fit_matrix(pairs, MODEL)

    def test_rank_deficient_sources(self):
        c = RGBW["white"]
        pairs = [MeasurementPair(c.scaled(s), c.scaled(s)) for s in (0.5, 0.75, 1.0)]
        with pytest.raises(RankDeficiencyError):
            fit_matrix(pairs, MODEL)

    def test_ill_conditioned_sources_refused(self):
        sources = [
            Tristimulus(1.0, 0.0, 0.0),
            Tristimulus(1.0, 1e-9, 0.0),
            Tristimulus(1.0, 0.0, 1e-9),
        ]
        pairs = [MeasurementPair(s, s) for s in sources]
        with pytest.raises(SingularSystemError):
            fit_matrix(pairs, None, weighting="uniform")

    def test_unknown_weighting(self):
        pairs = _pairs_through(np.eye(3))
        with pytest.raises(ValidationError):
            fit_matrix(pairs, MODEL, weighting="diagonal")

    def test_proposed_requires_model(self):
        pairs = _pairs_through(np.eye(3))
        with pytest.raises(ValidationError):
            fit_matrix(pairs, None, weighting="proposed")

    def test_condition_number_reported(self):
        calib = fit_matrix(_pairs_through(np.eye(3)), MODEL)
        assert np.isfinite(calib.condition_number)
        assert calib.condition_number >= 1.0
        assert calib.fit_pairs == 4


class TestWlsOptimality:
    def test_perturbing_fitted_matrix_increases_objective(self):
        rng = np.random.default_rng(19)
        M_true = _random_matrix(rng)
        pairs = [
            MeasurementPair(
                source=c,
                reference=Tristimulus.from_array(
                    M_true @ c.as_array() + rng.normal(0, 0.1, 3)),
                color_id=cid)
            for cid, c in RGBW.items()
        ]
        calib = fit_matrix(pairs, MODEL, weighting="proposed")
        best = wls_objective(pairs, MODEL, calib.M, weighting="proposed")
        eps = 1e-6
        for i in range(3):
            for j in range(3):
                for sign in (+1, -1):
                    perturbed = calib.M.copy()
                    perturbed[i, j] += sign * eps
                    worse = wls_objective(pairs, MODEL, perturbed, weighting="proposed")
                    assert worse > best


class TestApplyEvaluate:
    def test_identity_apply(self):
        calib = CalibrationMatrix(M=np.eye(3), weighting="uniform", fit_pairs=3,
                                  condition_number=1.0)
        assert np.array_equal(apply(calib, Tristimulus(1, 2, 3)), [1, 2, 3])

    def test_scaling_apply(self):
        calib = CalibrationMatrix(M=2 * np.eye(3), weighting="uniform", fit_pairs=3,
                                  condition_number=1.0)
        assert np.array_equal(apply(calib, Tristimulus(1, 1, 1)), [2, 2, 2])

    def test_perfect_calibration_scores_zero(self):
        M_true = _random_matrix(np.random.default_rng(5))
        pairs = _pairs_through(M_true)
        calib = fit_matrix(pairs, MODEL)
        result = evaluate(calib, pairs)
        assert result.mean_abs_error == pytest.approx(0.0, abs=1e-9)

    def test_single_component_difference(self):
        calib = CalibrationMatrix(M=np.eye(3), weighting="uniform", fit_pairs=3,
                                  condition_number=1.0)
        result = evaluate(calib, [MeasurementPair(Tristimulus(1, 1, 1),
                                                  Tristimulus(2, 1, 1), "c")])
        assert result.mean_abs_error == pytest.approx(1.0, abs=1e-15)
        assert result.per_pair[0].abs_error == pytest.approx(1.0, abs=1e-15)
        assert result.per_color_mean == {"c": pytest.approx(1.0, abs=1e-15)}

    def test_empty_holdout(self):
        calib = CalibrationMatrix(M=np.eye(3), weighting="uniform", fit_pairs=3,
                                  condition_number=1.0)
        with pytest.raises(EmptyInputError):
            evaluate(calib, [])


class TestPairsFromRecords:
    def _records(self):
        rows = []
        for panel, offset in (("P1", 0.0), ("P2", 1.0)):
            for repeat in range(2):
                for cid, c in RGBW.items():
                    rows.append(MeasurementRecord(
                        panel_id=panel, color_id=cid, brightness=1.0,
                        repeat_index=repeat, timestamp=float(repeat),
                        X=c.X + offset + repeat, Y=c.Y + offset, Z=c.Z + offset))
        return rows

    def test_mean_aggregation(self):
        pairs = pairs_from_records(self._records(), "P2", "P1", ["red", "green", "blue"])
        red = next(p for p in pairs if p.color_id == "red")
        # P2 red X: mean of (X+1+0, X+1+1) = X + 1.5
        assert red.source.X == pytest.approx(RGBW["red"].X + 1.5)
        assert red.reference.X == pytest.approx(RGBW["red"].X + 0.5)

    def test_first_aggregation(self):
        pairs = pairs_from_records(self._records(), "P2", "P1",
                                   ["red"], aggregate="first")
        assert pairs[0].source.X == pytest.approx(RGBW["red"].X + 1.0)

    def test_missing_color(self):
        with pytest.raises(UnknownColorError):
            pairs_from_records(self._records(), "P2", "P1", ["orange"])

    def test_missing_brightness(self):
        with pytest.raises(UnknownColorError):
            pairs_from_records(self._records(), "P2", "P1", ["red"], brightness=0.5)
