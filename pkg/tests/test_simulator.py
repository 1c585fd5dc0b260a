import numpy as np
import pytest

from oledcolor.colorspace import Tristimulus
from oledcolor.errors import UnknownColorError, ValidationError
from oledcolor.noise_model import (
    NoiseModel,
    covariance,
    direction_basis,
    directional_std,
    sample_mean,
)
from oledcolor.simulator import (
    CampaignSpec,
    ClampCounter,
    run_campaign,
    sample_measurement,
    sample_measurements,
    sample_panel,
)

WHITE = Tristimulus(95.05, 100.0, 108.9)
COLORS = {
    "red": Tristimulus(41.24, 21.26, 1.93),
    "green": Tristimulus(35.76, 71.52, 11.92),
    "blue": Tristimulus(18.05, 7.22, 95.05),
    "white": WHITE,
}

# Small enough that offsets round away entirely against ~100-scale colors.
NEGLIGIBLE = NoiseModel(a=1e-30, ratio=5.0, provenance="fitted")


def _spec(**kwargs):
    defaults = dict(n_panels=1, repeats_per_color=12, colors=COLORS, seed=99)
    defaults.update(kwargs)
    return CampaignSpec(**defaults)


class TestSamplePanel:
    def test_zero_noise_limit_returns_population_means(self):
        spec = _spec(between_model=NEGLIGIBLE)
        panel = sample_panel(COLORS, spec, np.random.default_rng(1))
        assert panel.true_colors == COLORS

    def test_same_seed_identical_different_seed_distinct(self):
        spec = _spec()
        a = sample_panel(COLORS, spec, np.random.default_rng(5))
        b = sample_panel(COLORS, spec, np.random.default_rng(5))
        c = sample_panel(COLORS, spec, np.random.default_rng(6))
        assert a.true_colors == b.true_colors
        assert a.true_colors != c.true_colors

    def test_cross_panel_spread_matches_model(self):
        # Empirical std of X+Y+Z across many panels vs the v1-projected
        # theoretical value: sum-noise std = a*ratio*s * (s / ||w||).
        spec = _spec()
        rng = np.random.default_rng(2024)
        sums = np.array([
            sample_panel({"white": WHITE}, spec, rng).true_colors["white"].total
            for _ in range(702)
        ])
        model = spec.between_model
        s = WHITE.total
        theory = model.a * model.ratio * s * (s / np.linalg.norm(WHITE.as_array()))
        assert np.std(sums, ddof=1) == pytest.approx(theory, rel=0.10)


class TestSampleMeasurement:
    def test_zero_noise_limit(self):
        spec = _spec(within_model=NEGLIGIBLE, between_model=NEGLIGIBLE)
        panel = sample_panel(COLORS, spec, np.random.default_rng(0))
        m = sample_measurement(panel, "white", np.random.default_rng(1))
        assert m == WHITE

    def test_directional_spread_matches_model(self):
        color = Tristimulus(30.0, 30.0, 30.0)
        spec = _spec(colors={"c": color}, between_model=NEGLIGIBLE)
        panel = sample_panel({"c": color}, spec, np.random.default_rng(0))
        draws = sample_measurements(panel, "c", np.random.default_rng(7), 10_000)
        basis = direction_basis(sample_mean(draws))
        a = spec.within_model.a
        # s = 90: sigma_v1 = 5 * a * 90 = 0.225, sigma_v2 = a * 90 = 0.045.
        assert directional_std(draws, basis.v1) == pytest.approx(5 * a * 90, rel=0.03)
        assert directional_std(draws, basis.v2) == pytest.approx(a * 90, rel=0.05)
        assert directional_std(draws, basis.v3) == pytest.approx(a * 90, rel=0.05)

    def test_empirical_covariance_eigenvalues(self):
        color = Tristimulus(40.0, 20.0, 65.0)
        spec = _spec(colors={"c": color}, between_model=NEGLIGIBLE)
        panel = sample_panel({"c": color}, spec, np.random.default_rng(0))
        draws = sample_measurements(panel, "c", np.random.default_rng(31), 10_000)
        dev = draws - draws.mean(axis=0)
        empirical = dev.T @ dev / len(draws)
        expected = np.sort(np.linalg.eigvalsh(covariance(spec.within_model, color)))
        observed = np.sort(np.linalg.eigvalsh(empirical))
        assert observed == pytest.approx(expected, rel=0.05)

    def test_brightness_scales_mean_and_noise(self):
        spec = _spec(within_model=NEGLIGIBLE, between_model=NEGLIGIBLE)
        panel = sample_panel(COLORS, spec, np.random.default_rng(0))
        m = sample_measurement(panel, "white", np.random.default_rng(1), brightness=0.25)
        assert m == WHITE.scaled(0.25)

    def test_unknown_color(self):
        panel = sample_panel(COLORS, _spec(), np.random.default_rng(0))
        with pytest.raises(UnknownColorError):
            sample_measurement(panel, "orange", np.random.default_rng(1))

    def test_clamping_counted(self):
        # Absurd noise scale forces negative draws; they are clamped and counted.
        loud = NoiseModel(a=10.0, ratio=5.0, provenance="fitted")
        spec = _spec(within_model=loud, between_model=NEGLIGIBLE)
        panel = sample_panel(COLORS, spec, np.random.default_rng(0))
        counter = ClampCounter()
        draws = sample_measurements(panel, "white", np.random.default_rng(3), 500,
                                    counter=counter)
        assert counter.clamped > 0
        assert counter.total == 500 * 3
        assert np.all(draws >= 0)


class TestRunCampaign:
    def test_cardinality_single_color(self):
        spec = CampaignSpec(n_panels=1, repeats_per_color=12,
                            colors={"white": WHITE}, seed=1)
        records = run_campaign(spec)
        assert len(records) == 12
        assert {r.panel_id for r in records} == {"P01"}
        assert {r.color_id for r in records} == {"white"}
        assert sorted(r.repeat_index for r in records) == list(range(12))

    def test_cardinality_255_colors_3_brightness(self):
        rng = np.random.default_rng(0)
        colors = {f"c{i:03d}": Tristimulus.from_array(rng.uniform(5, 100, 3))
                  for i in range(255)}
        spec = CampaignSpec(n_panels=1, repeats_per_color=1, colors=colors,
                            brightness_levels=(1.0, 0.5, 0.25), seed=2)
        records = run_campaign(spec)
        assert len(records) == 765

    def test_seed_determinism_bit_identical(self):
        spec = _spec(n_panels=3, repeats_per_color=2)
        assert run_campaign(spec) == run_campaign(spec)

    def test_different_seeds_differ(self):
        a = run_campaign(_spec(seed=1, repeats_per_color=1))
        b = run_campaign(_spec(seed=2, repeats_per_color=1))
        assert a != b

    def test_timestamps_increase_within_panel(self):
        records = run_campaign(_spec(repeats_per_color=3))
        times = [r.timestamp for r in records]
        assert times == sorted(times)
        assert len(set(times)) == len(times)

    def test_invalid_specs(self):
        with pytest.raises(ValidationError):
            CampaignSpec(n_panels=0, repeats_per_color=1, colors=COLORS)
        with pytest.raises(ValidationError):
            CampaignSpec(n_panels=1, repeats_per_color=0, colors=COLORS)
        with pytest.raises(ValidationError):
            CampaignSpec(n_panels=1, repeats_per_color=1, colors={})
        with pytest.raises(ValidationError):
            CampaignSpec(n_panels=1, repeats_per_color=1, colors=COLORS,
                         brightness_levels=(1.5,))
