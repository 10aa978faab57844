"""Disturbance generators: values, bounds, and reproducibility."""

import math

import numpy as np
import pytest

from dbar.core import ConfigurationError
from dbar.noise import (
    GAUSSIAN_HI,
    GAUSSIAN_LO,
    NoiseConfig,
    SINUSOIDAL_1D,
    SINUSOIDAL_2D,
    TRUNCATED_GAUSSIAN,
    UNIFORM_RANDOM_WALK,
    noise_path,
)


class TestSinusoids:
    def test_2d_starts_at_zero(self):
        path = noise_path(NoiseConfig(SINUSOIDAL_2D), horizon=10)
        np.testing.assert_array_equal(path[0], np.zeros(2))

    def test_2d_values_match_sine_table(self):
        path = noise_path(NoiseConfig(SINUSOIDAL_2D), horizon=10)
        for t in range(11):
            assert path[t, 0] == math.sin(t / (5.0 * math.pi))
            assert path[t, 1] == math.sin(t / (11.0 * math.pi))

    def test_1d_starts_at_zero_and_increases_early(self):
        path = noise_path(NoiseConfig(SINUSOIDAL_1D), horizon=10)
        assert path[0] == 0.0
        # t/(7*pi) stays below pi/2 on [0, 10], so the sine is increasing
        assert np.all(np.diff(path) > 0)
        for t in range(11):
            assert path[t] == math.sin(t / (7.0 * math.pi))

    def test_unit_coordinate_bound(self):
        path = noise_path(NoiseConfig(SINUSOIDAL_2D), horizon=5000)
        assert np.abs(path).max() <= 1.0


class TestTruncatedGaussian:
    def test_exact_truncation_interval(self):
        path = noise_path(NoiseConfig(TRUNCATED_GAUSSIAN, seed=3), horizon=10**6 // 2 - 1)
        assert path.min() >= GAUSSIAN_LO
        assert path.max() <= GAUSSIAN_HI

    def test_mean_close_to_analytic(self):
        # truncation at -7 and +7 standard deviations barely moves the mean
        path = noise_path(NoiseConfig(TRUNCATED_GAUSSIAN, seed=3), horizon=10**6 // 2 - 1)
        assert path.size == 10**6
        assert abs(path.mean() - 0.3) < 0.003

    def test_reproducible(self):
        a = noise_path(NoiseConfig(TRUNCATED_GAUSSIAN, seed=11), horizon=100)
        b = noise_path(NoiseConfig(TRUNCATED_GAUSSIAN, seed=11), horizon=100)
        np.testing.assert_array_equal(a, b)
        c = noise_path(NoiseConfig(TRUNCATED_GAUSSIAN, seed=12), horizon=100)
        assert not np.array_equal(a, c)


class TestRandomWalk:
    def test_requires_horizon(self):
        with pytest.raises(ConfigurationError):
            noise_path(NoiseConfig(UNIFORM_RANDOM_WALK, horizon=None, seed=1), horizon=0)

    def test_coordinate_bound_over_full_horizon(self):
        for seed in range(5):
            cfg = NoiseConfig(UNIFORM_RANDOM_WALK, horizon=3000, seed=seed)
            path = noise_path(cfg, horizon=3000)
            assert np.abs(path).max() <= 1.0

    def test_start_and_increment_scales(self):
        T = 3000
        cfg = NoiseConfig(UNIFORM_RANDOM_WALK, horizon=T, seed=0)
        path = noise_path(cfg, horizon=T)
        scale = 2.0 / (3.0 * T)
        assert np.all(np.abs(path[0] - 1.0 / 3.0) <= scale)
        increments = np.diff(path, axis=0)
        assert np.abs(increments).max() <= scale

    def test_reproducible_per_seed(self):
        cfg = NoiseConfig(UNIFORM_RANDOM_WALK, horizon=500, seed=9)
        a = noise_path(cfg, horizon=500)
        b = noise_path(cfg, horizon=500)
        np.testing.assert_array_equal(a, b)

    def test_rejects_requests_beyond_horizon(self):
        cfg = NoiseConfig(UNIFORM_RANDOM_WALK, horizon=50, seed=1)
        with pytest.raises(ConfigurationError):
            noise_path(cfg, horizon=100)


def test_unknown_kind_rejected():
    with pytest.raises(ConfigurationError):
        noise_path(NoiseConfig("white"), horizon=5)
