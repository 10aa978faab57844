"""Bounded disturbance generators, reproducible per (kind, horizon, seed)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError, InvariantViolation

SINUSOIDAL_2D = "sinusoidal-2d"
SINUSOIDAL_1D = "sinusoidal-1d"
TRUNCATED_GAUSSIAN = "truncated-gaussian"
UNIFORM_RANDOM_WALK = "uniform-random-walk"

NOISE_KINDS = (SINUSOIDAL_2D, SINUSOIDAL_1D, TRUNCATED_GAUSSIAN, UNIFORM_RANDOM_WALK)

GAUSSIAN_MEAN = 0.3
GAUSSIAN_SD = 0.1
GAUSSIAN_LO = -0.4
GAUSSIAN_HI = 1.0

# Keeps the disturbance stream distinct from the policy's random stream
# when both are derived from the same episode seed.
_NOISE_STREAM_TAG = 101


@dataclass(frozen=True)
class NoiseConfig:
    kind: str
    horizon: int | None = None
    seed: int = 0


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([_NOISE_STREAM_TAG, seed]))


def _truncated_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    out = rng.normal(GAUSSIAN_MEAN, GAUSSIAN_SD, size=shape)
    bad = (out < GAUSSIAN_LO) | (out > GAUSSIAN_HI)
    while bad.any():
        out[bad] = rng.normal(GAUSSIAN_MEAN, GAUSSIAN_SD, size=int(bad.sum()))
        bad = (out < GAUSSIAN_LO) | (out > GAUSSIAN_HI)
    return out


def noise_path(config: NoiseConfig, horizon: int) -> np.ndarray:
    """Disturbance samples w_0..w_horizon.

    Shape is (horizon+1, 2) for the 2-d kinds and (horizon+1,) for the
    scalar sinusoid.  Stochastic kinds replay a stream seeded by
    ``config.seed``, so identical configs yield bit-identical paths.
    """
    if config.kind not in NOISE_KINDS:
        raise ConfigurationError(f"unknown noise kind {config.kind!r}")
    n = horizon + 1
    t = np.arange(n, dtype=float)
    if config.kind == SINUSOIDAL_2D:
        path = np.column_stack([np.sin(t / (5.0 * math.pi)), np.sin(t / (11.0 * math.pi))])
    elif config.kind == SINUSOIDAL_1D:
        path = np.sin(t / (7.0 * math.pi))
    elif config.kind == TRUNCATED_GAUSSIAN:
        path = _truncated_gaussian(_rng(config.seed), (n, 2))
    else:
        T = config.horizon if config.horizon is not None else horizon
        if T is None or T < 1:
            raise ConfigurationError(
                "uniform-random-walk needs a horizon >= 1 to scale its increments"
            )
        if horizon > T:
            raise ConfigurationError(
                f"walk path requested beyond its horizon ({horizon} > {T})"
            )
        rng = _rng(config.seed)
        scale = 2.0 / (3.0 * T)
        start = rng.uniform(1.0 / 3.0 - scale, 1.0 / 3.0 + scale, size=2)
        increments = rng.uniform(-scale, scale, size=(n - 1, 2))
        path = np.vstack([start, start + np.cumsum(increments, axis=0)])
    _assert_bounds(config.kind, path)
    return path


def _assert_bounds(kind: str, path: np.ndarray) -> None:
    """Per-kind coordinate bounds; a violation is a generator bug."""
    if kind == TRUNCATED_GAUSSIAN:
        if path.min() < GAUSSIAN_LO or path.max() > GAUSSIAN_HI:
            raise InvariantViolation("truncated-gaussian sample left its interval")
    elif np.abs(path).max() > 1.0:
        raise InvariantViolation(f"{kind} sample exceeded the unit coordinate bound")
