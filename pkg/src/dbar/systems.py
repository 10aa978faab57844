"""The two experiment plants and their default controller pools."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    LINEAR_GAIN,
    NESTED_SATURATING,
    ConfigurationError,
    ControllerSpec,
    ExplosionError,
)

LINEAR_A_DEFAULT = ((2.0, 1.2), (1.1, 2.5))
LINEAR_B_DEFAULT = ((1.0, 0.3), (0.4, 0.9))

LINEAR_K1_GRID = (-3.0, -2.0, -1.0)
LINEAR_K2_GRID = (-1.0, 0.0, 1.0)
LINEAR_K3_GRID = (-3.0, -2.0, -1.0)
LINEAR_K4_GRID = (-3.0, -2.0, -1.0)

BALLBEAM_P_GRID = (2.0, 16.0, 30.0, 44.0, 58.0, 72.0, 86.0, 100.0)
BALLBEAM_K1_GRID = tuple(2.0 + 0.5 * i for i in range(10))
BALLBEAM_K2_GRID = tuple(1.0 + 0.5 * i for i in range(10))


@dataclass(frozen=True)
class LinearPlant:
    """x_next = A x + B u + w on R^2 with 2-d action and additive 2-d noise."""

    a: tuple[tuple[float, ...], ...] = LINEAR_A_DEFAULT
    b: tuple[tuple[float, ...], ...] = LINEAR_B_DEFAULT

    state_dim = 2
    noise_dim = 2

    @property
    def a_matrix(self) -> np.ndarray:
        return np.asarray(self.a, dtype=float)

    @property
    def b_matrix(self) -> np.ndarray:
        return np.asarray(self.b, dtype=float)

    def step(self, x: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        if len(x) != 2 or len(u) != 2:
            raise ConfigurationError("linear plant expects dim-2 state and action")
        out = self.a_matrix @ x + self.b_matrix @ u + w
        if not np.isfinite(out).all():
            raise ExplosionError()
        return out


@dataclass(frozen=True)
class BallBeamPlant:
    """Forward-Euler discretized ball-beam with scalar action and noise.

    State (y1, y2, y3, y4) = (ball position, ball velocity, scaled beam
    angle, scaled beam angular velocity); the disturbance enters the
    velocity channel with gain 3.
    """

    b_const: float = 0.7143
    dt: float = 0.01
    noise_gain: float = 3.0

    state_dim = 4
    noise_dim = 1

    def step(self, y: np.ndarray, v: float, w: float) -> np.ndarray:
        if len(y) != 4:
            raise ConfigurationError("ball-beam plant expects a dim-4 state")
        y1, y2, y3, y4 = (float(y[0]), float(y[1]), float(y[2]), float(y[3]))
        gb = 9.81 * self.b_const
        accel = (
            gb * math.sin(y3 / gb)
            + (y1 * y4 * y4) / (self.b_const * 9.81**2)
            + self.noise_gain * float(w)
        )
        out = np.array(
            [
                y1 + self.dt * y2,
                y2 + self.dt * accel,
                y3 + self.dt * y4,
                y4 + self.dt * float(v),
            ]
        )
        if not np.isfinite(out).all():
            raise ExplosionError()
        return out


def default_linear_pool() -> list[ControllerSpec]:
    """The 81 linear gain candidates on the default parameter grid."""
    specs = []
    for k1 in LINEAR_K1_GRID:
        for k2 in LINEAR_K2_GRID:
            for k3 in LINEAR_K3_GRID:
                for k4 in LINEAR_K4_GRID:
                    specs.append(
                        ControllerSpec(
                            index=len(specs),
                            kind=LINEAR_GAIN,
                            gain=((k1, k2), (k3, k4)),
                        )
                    )
    return specs


def default_ballbeam_pool() -> list[ControllerSpec]:
    """The 800 nested-saturating candidates on the default parameter grid."""
    specs = []
    for p in BALLBEAM_P_GRID:
        for k1 in BALLBEAM_K1_GRID:
            for k2 in BALLBEAM_K2_GRID:
                specs.append(
                    ControllerSpec(index=len(specs), kind=NESTED_SATURATING, p=p, k1=k1, k2=k2)
                )
    return specs


def linear_pool_from_grids(k1s, k2s, k3s, k4s) -> list[ControllerSpec]:
    specs = []
    for k1 in k1s:
        for k2 in k2s:
            for k3 in k3s:
                for k4 in k4s:
                    specs.append(
                        ControllerSpec(
                            index=len(specs),
                            kind=LINEAR_GAIN,
                            gain=((float(k1), float(k2)), (float(k3), float(k4))),
                        )
                    )
    return specs


def ballbeam_pool_from_grids(ps, k1s, k2s) -> list[ControllerSpec]:
    specs = []
    for p in ps:
        for k1 in k1s:
            for k2 in k2s:
                specs.append(
                    ControllerSpec(
                        index=len(specs),
                        kind=NESTED_SATURATING,
                        p=float(p),
                        k1=float(k1),
                        k2=float(k2),
                    )
                )
    return specs


def spectral_radius_2x2(m: np.ndarray) -> float:
    """Largest eigenvalue magnitude via the 2x2 characteristic polynomial."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    disc = tr * tr - 4.0 * det
    if disc >= 0.0:
        root = math.sqrt(disc)
        return max(abs((tr + root) / 2.0), abs((tr - root) / 2.0))
    # complex pair: |lambda|^2 = det
    return math.sqrt(det)


def closed_loop_matrix(plant: LinearPlant, spec: ControllerSpec) -> np.ndarray:
    return plant.a_matrix + plant.b_matrix @ spec.gain_matrix()


def classify_linear_pool(
    plant: LinearPlant, pool: list[ControllerSpec]
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Partition pool indices into (stabilizing, destabilizing) sets.

    A linear gain is destabilizing iff the closed-loop spectral radius is
    >= 1; for linear dynamics that spectral test is equivalent to the
    stability-envelope notion used elsewhere.
    """
    stabilizing, destabilizing = [], []
    for spec in pool:
        if spec.kind != LINEAR_GAIN:
            raise ConfigurationError("classification needs a linear-gain pool")
        if spectral_radius_2x2(closed_loop_matrix(plant, spec)) >= 1.0:
            destabilizing.append(spec.index)
        else:
            stabilizing.append(spec.index)
    return tuple(sorted(stabilizing)), tuple(sorted(destabilizing))
