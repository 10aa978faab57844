"""Presets, the flat config format, and validation behaviour."""

import pytest

from dbar.config import (
    ExperimentConfig,
    apply_flat_overrides,
    config_from_flat,
    config_to_flat,
    make_preset,
    parse_config_file,
    parse_seed_spec,
    validate_config,
)
from dbar.core import UsageError


class TestPresets:
    def test_linear_sinusoidal_parameters(self):
        cfg = make_preset("example1-sinusoidal")
        assert cfg.horizon == 3000
        assert cfg.eta0 == 0.025
        assert cfg.gamma == 2.5
        assert cfg.alpha0 == 1.01
        assert cfg.x0 == (100.0, 200.0)
        assert cfg.build_schedule().tau(0) == 11
        assert cfg.build_beta()(1) == 0.99
        assert len(cfg.build_pool()) == 81
        assert cfg.cost == "state-norm-squared"
        delta, notes = cfg.resolve_delta()
        assert delta == pytest.approx(2.5 / (1.0 - 0.99**11), rel=1e-15)
        assert notes == ()

    def test_ballbeam_beta1_parameters(self):
        cfg = make_preset("example2-beta1")
        assert cfg.horizon == 5000
        assert cfg.gamma == 1.5
        assert cfg.x0 == (-32.0, 24.0, 5.6, 24.0)
        sched = cfg.build_schedule()
        assert sched.tau(0) == 9
        assert sched.tau(1) == 10
        beta = cfg.build_beta()
        assert beta(5) == 1.0
        assert beta(20) == 0.5
        assert len(cfg.build_pool()) == 800
        assert cfg.cost == "state-plus-action-norm-squared"

    def test_ballbeam_offset_fallback_when_envelope_is_flat(self):
        # beta1(tau0) = 1 leaves the minimal offset undefined; the default
        # comes from the first contracting time t = 11
        cfg = make_preset("example2-beta1")
        delta, notes = cfg.resolve_delta()
        assert delta == pytest.approx(1.5 / (1.0 - 10.0 / 11.0), rel=1e-12)
        assert len(notes) == 1

    def test_beta_variants(self):
        for name, q in (("example2-beta2", 1.02), ("example2-beta3", 1.05),
                        ("example2-beta4", 1.08)):
            cfg = make_preset(name)
            assert cfg.beta_q == q

    def test_noise_variants(self):
        assert make_preset("example1-gaussian").noise == "truncated-gaussian"
        assert make_preset("example1-walk").noise == "uniform-random-walk"

    def test_unknown_preset_named_in_error(self):
        with pytest.raises(UsageError, match="nope"):
            make_preset("nope")


class TestFlatFormat:
    def test_round_trip(self):
        cfg = make_preset("example1-sinusoidal")
        cfg.seeds = (1, 4, 9)
        assert config_from_flat(config_to_flat(cfg)) == cfg

    def test_round_trip_ballbeam(self):
        cfg = make_preset("example2-beta3")
        assert config_from_flat(config_to_flat(cfg)) == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(UsageError, match="warp"):
            apply_flat_overrides(ExperimentConfig(), {"warp": "9"})

    def test_unparseable_value_names_key(self):
        with pytest.raises(UsageError, match="eta0"):
            apply_flat_overrides(ExperimentConfig(), {"eta0": "fast"})

    def test_config_file_parsing(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# a comment\nhorizon = 50\n\ngamma = 3.0  # inline\n")
        assert parse_config_file(str(path)) == {"horizon": "50", "gamma": "3.0"}

    def test_config_file_bad_line(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("horizon 50\n")
        with pytest.raises(UsageError, match="key = value"):
            parse_config_file(str(path))


class TestSeedSpec:
    def test_range(self):
        assert parse_seed_spec("1..5") == (1, 2, 3, 4, 5)

    def test_list(self):
        assert parse_seed_spec("1,4,9") == (1, 4, 9)

    def test_single(self):
        assert parse_seed_spec("7") == (7,)

    def test_bad_range(self):
        with pytest.raises(UsageError, match="seeds"):
            parse_seed_spec("a..b")

    def test_empty_range(self):
        with pytest.raises(UsageError, match="seeds"):
            parse_seed_spec("5..1")


class TestValidation:
    def test_negative_eta0_named(self):
        cfg = make_preset("example1-sinusoidal")
        cfg.eta0 = -1.0
        with pytest.raises(UsageError, match="eta0"):
            validate_config(cfg)

    def test_alpha0_must_exceed_one(self):
        cfg = make_preset("example1-sinusoidal")
        cfg.alpha0 = 1.0
        with pytest.raises(UsageError, match="alpha0"):
            validate_config(cfg)

    def test_x0_dimension_checked(self):
        cfg = make_preset("example1-sinusoidal")
        cfg.x0 = (1.0, 2.0, 3.0)
        with pytest.raises(UsageError, match="x0"):
            validate_config(cfg)

    def test_delta_below_minimal_rejected(self):
        cfg = make_preset("example1-sinusoidal")
        cfg.delta = 1.0
        with pytest.raises(UsageError, match="delta"):
            validate_config(cfg)

    def test_delta_above_minimal_accepted(self):
        cfg = make_preset("example1-sinusoidal")
        cfg.delta = 30.0
        validate_config(cfg)
        assert cfg.resolve_delta()[0] == 30.0

    def test_noise_plant_pairing(self):
        cfg = make_preset("example2-beta1")
        cfg.noise = "sinusoidal-2d"
        with pytest.raises(UsageError, match="noise"):
            validate_config(cfg)

    def test_presets_all_validate(self):
        from dbar.config import PRESET_NAMES

        for name in PRESET_NAMES:
            validate_config(make_preset(name))
