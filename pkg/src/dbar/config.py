"""Experiment configuration: a flat, typed key-value schema.

Every run is described by one ExperimentConfig.  The same flat ``key =
value`` text format is used for config files, CLI overrides, and the
metadata header embedded in every emitted CSV, so a CSV always
round-trips to the exact config that produced it.

Schema (all keys, with types):
  preset          str     name of the preset the config was derived from
  plant           str     linear | ballbeam
  noise           str     sinusoidal-2d | sinusoidal-1d | truncated-gaussian |
                          uniform-random-walk
  cost            str     state-norm-squared | state-plus-action-norm-squared
  mode            str     alg1 | alg2 | alg3
  batch           str     fixed | dynamic
  rate            str     fixed | adaptive
  horizon         int     number of costed steps is horizon+1 (t = 0..horizon)
  eta0            float   initial learning rate (> 0)
  gamma           float   envelope noise gain (> 0)
  alpha0          float   initial bucket base (> 1)
  w_max           float   disturbance norm bound handed to the envelope check
  delta           float   bucket offset; omit for the minimal admissible value
  x0              floats  comma-separated initial state
  schedule_kind   str     fixed | polynomial
  tau             int     fixed batch length (schedule_kind = fixed)
  z1,z2,z3,nu     float   polynomial batch parameters
  beta_kind       str     exponential | polynomial
  beta_rate       float   exponential decay factor (0 < rate < 1)
  beta_c, beta_q  float   polynomial envelope min(c/t**q, 1)
  switch_cost     float   per-switch regret penalty (alg3 metric)
  seeds           ints    seed list, range syntax "1..10" or "1,4,9"
  y_exponent      float   falsification-count rate exponent (alg2)
  pool_*          floats  explicit parameter grids, see below

Pool grids: linear pools use pool_k1..pool_k4 (gain entries); ball-beam
pools use pool_p, pool_bk1, pool_bk2.  Defaults reproduce the standard
81- and 800-controller pools.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from . import noise as noise_mod
from .core import COST_KINDS, ControllerSpec, UsageError
from .bandit import MODES
from .schedule import (
    BatchSchedule,
    BetaEnvelope,
    delta_default,
    exponential_envelope,
    fixed_schedule,
    polynomial_envelope,
    sqrt_batch_schedule,
)
from . import systems

PLANT_LINEAR = "linear"
PLANT_BALLBEAM = "ballbeam"

BATCH_FIXED = "fixed"
BATCH_DYNAMIC = "dynamic"
RATE_FIXED = "fixed"
RATE_ADAPTIVE = "adaptive"

_DEFAULT_SCHEDULE = sqrt_batch_schedule(11, shift=10.0, scale=10.0)


@dataclass
class ExperimentConfig:
    preset: str = "custom"
    plant: str = PLANT_LINEAR
    noise: str = noise_mod.SINUSOIDAL_2D
    cost: str = "state-norm-squared"
    mode: str = "alg1"
    batch: str = BATCH_DYNAMIC
    rate: str = RATE_ADAPTIVE
    horizon: int = 3000
    eta0: float = 0.025
    gamma: float = 2.5
    alpha0: float = 1.01
    w_max: float = 1.0
    delta: float | None = None
    x0: tuple[float, ...] = (100.0, 200.0)
    schedule_kind: str = "polynomial"
    tau: int = 0
    z1: float = _DEFAULT_SCHEDULE.z1
    z2: float = _DEFAULT_SCHEDULE.z2
    z3: float = _DEFAULT_SCHEDULE.z3
    nu: float = _DEFAULT_SCHEDULE.nu
    beta_kind: str = "exponential"
    beta_rate: float = 0.99
    beta_c: float = 0.0
    beta_q: float = 0.0
    switch_cost: float = 1.0
    seeds: tuple[int, ...] = (1,)
    y_exponent: float = 0.5
    pool_k1: tuple[float, ...] = systems.LINEAR_K1_GRID
    pool_k2: tuple[float, ...] = systems.LINEAR_K2_GRID
    pool_k3: tuple[float, ...] = systems.LINEAR_K3_GRID
    pool_k4: tuple[float, ...] = systems.LINEAR_K4_GRID
    pool_p: tuple[float, ...] = systems.BALLBEAM_P_GRID
    pool_bk1: tuple[float, ...] = systems.BALLBEAM_K1_GRID
    pool_bk2: tuple[float, ...] = systems.BALLBEAM_K2_GRID
    notes: tuple[str, ...] = ()

    # --- derived objects -------------------------------------------------

    def build_plant(self):
        if self.plant == PLANT_LINEAR:
            return systems.LinearPlant()
        if self.plant == PLANT_BALLBEAM:
            return systems.BallBeamPlant()
        raise UsageError(f"plant: unknown value {self.plant!r}")

    def build_pool(self) -> list[ControllerSpec]:
        if self.plant == PLANT_LINEAR:
            return systems.linear_pool_from_grids(
                self.pool_k1, self.pool_k2, self.pool_k3, self.pool_k4
            )
        return systems.ballbeam_pool_from_grids(self.pool_p, self.pool_bk1, self.pool_bk2)

    def build_schedule(self) -> BatchSchedule:
        """The configured schedule; the fixed-batch ablation pins tau at tau_0."""
        dynamic = self._dynamic_schedule()
        if self.batch == BATCH_FIXED:
            return fixed_schedule(dynamic.tau(0))
        return dynamic

    def _dynamic_schedule(self) -> BatchSchedule:
        if self.schedule_kind == "fixed":
            return fixed_schedule(self.tau)
        from .schedule import polynomial_schedule

        return polynomial_schedule(self.z1, self.z2, self.z3, self.nu)

    def build_beta(self) -> BetaEnvelope:
        if self.beta_kind == "exponential":
            return exponential_envelope(self.beta_rate)
        return polynomial_envelope(self.beta_c, self.beta_q)

    def build_noise_config(self, seed: int) -> noise_mod.NoiseConfig:
        return noise_mod.NoiseConfig(kind=self.noise, horizon=self.horizon, seed=seed)

    def resolve_delta(self) -> tuple[float, tuple[str, ...]]:
        """The bucket offset actually used, plus fidelity notes.

        Defaults to the minimal admissible gamma*w_max/(1 - beta(tau_0)).
        When beta(tau_0) >= 1 (slow polynomial envelopes with short first
        batches) the minimum is undefined; the default then uses the first
        integer time beyond tau_0 where the envelope drops below 1.
        """
        beta = self.build_beta()
        tau0 = self._dynamic_schedule().tau(0)
        notes: list[str] = []
        if beta(tau0) < 1.0:
            minimal = delta_default(self.gamma, self.w_max, beta, tau0)
        else:
            t_star = tau0 + 1
            while beta(t_star) >= 1.0:
                t_star += 1
            minimal = self.gamma * self.w_max / (1.0 - beta(t_star))
            notes.append(
                f"beta(tau0)=1: bucket offset taken from the first contracting "
                f"time t={t_star}"
            )
        if self.delta is None:
            return minimal, tuple(notes)
        if self.delta < minimal * (1.0 - 1e-12):
            raise UsageError(
                f"delta: {self.delta} is below the minimal admissible value {minimal:.6g}"
            )
        return self.delta, tuple(notes)

    def x0_array(self) -> np.ndarray:
        return np.asarray(self.x0, dtype=float)

    def arm_label(self) -> str:
        """Human label matching the ablation naming in reports and figures."""
        names = {
            (BATCH_DYNAMIC, RATE_ADAPTIVE): "DBAR",
            (BATCH_FIXED, RATE_ADAPTIVE): "Fixed tau, adaptive eta",
            (BATCH_DYNAMIC, RATE_FIXED): "Dynamic tau, fixed eta",
            (BATCH_FIXED, RATE_FIXED): "Fixed tau, fixed eta",
        }
        label = names[(self.batch, self.rate)]
        if self.mode != "alg1":
            label += f" ({self.mode})"
        return label

    def arm_slug(self) -> str:
        slugs = {
            (BATCH_DYNAMIC, RATE_ADAPTIVE): "dbar",
            (BATCH_FIXED, RATE_ADAPTIVE): "fixed-tau-adaptive-eta",
            (BATCH_DYNAMIC, RATE_FIXED): "dynamic-tau-fixed-eta",
            (BATCH_FIXED, RATE_FIXED): "fixed-tau-fixed-eta",
        }
        slug = slugs[(self.batch, self.rate)]
        if self.mode != "alg1":
            slug += f"-{self.mode}"
        return slug


_TUPLE_FLOAT_FIELDS = {
    "x0",
    "pool_k1",
    "pool_k2",
    "pool_k3",
    "pool_k4",
    "pool_p",
    "pool_bk1",
    "pool_bk2",
}
_TUPLE_STR_FIELDS = {"notes"}


def run_notes(cfg: ExperimentConfig) -> tuple[str, ...]:
    """Fidelity notes recorded in run metadata alongside the config."""
    notes = list(cfg.notes)
    _, delta_notes = cfg.resolve_delta()
    notes.extend(delta_notes)
    if cfg.noise == noise_mod.SINUSOIDAL_2D:
        notes.append(
            "the envelope check uses w_max=1 although the 2-d sinusoid's "
            "euclidean norm reaches sqrt(2)"
        )
    if cfg.mode == "alg3":
        notes.append(
            "switching regret charges the policy per change against a "
            "single-controller baseline (zero baseline switches)"
        )
    return tuple(dict.fromkeys(notes))


def parse_seed_spec(text: str) -> tuple[int, ...]:
    """Seed list syntax: "7", "1,4,9", or the inclusive range "1..100"."""
    text = text.strip()
    if ".." in text:
        lo_text, hi_text = text.split("..", 1)
        try:
            lo, hi = int(lo_text), int(hi_text)
        except ValueError as err:
            raise UsageError(f"seeds: bad range {text!r}") from err
        if hi < lo:
            raise UsageError(f"seeds: empty range {text!r}")
        return tuple(range(lo, hi + 1))
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as err:
        raise UsageError(f"seeds: bad list {text!r}") from err


def config_to_flat(cfg: ExperimentConfig) -> dict[str, str]:
    """Lossless flat text form; floats keep 17 significant digits."""
    out: dict[str, str] = {}
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        if f.name == "seeds":
            out[f.name] = ",".join(str(s) for s in val)
        elif f.name in _TUPLE_STR_FIELDS:
            if any(";" in item for item in val):
                raise UsageError(f"{f.name}: entries must not contain ';'")
            out[f.name] = ";".join(val)
        elif f.name in _TUPLE_FLOAT_FIELDS:
            out[f.name] = ",".join(f"{v:.17g}" for v in val)
        elif isinstance(val, float):
            out[f.name] = f"{val:.17g}"
        elif val is None:
            out[f.name] = ""
        else:
            out[f.name] = str(val)
    return out


def config_from_flat(flat: dict[str, str]) -> ExperimentConfig:
    cfg = ExperimentConfig()
    return apply_flat_overrides(cfg, flat)


def apply_flat_overrides(cfg: ExperimentConfig, flat: dict[str, str]) -> ExperimentConfig:
    known = {f.name: f for f in fields(ExperimentConfig)}
    for key, raw in flat.items():
        if key not in known:
            raise UsageError(f"{key}: unknown config key")
        raw = raw.strip()
        try:
            if key == "seeds":
                value = parse_seed_spec(raw)
            elif key in _TUPLE_STR_FIELDS:
                value = tuple(part for part in raw.split(";") if part)
            elif key in _TUPLE_FLOAT_FIELDS:
                value = tuple(float(part) for part in raw.split(",") if part.strip())
            elif key == "delta":
                value = None if raw == "" else float(raw)
            elif key in ("horizon", "tau"):
                value = int(raw)
            elif isinstance(getattr(cfg, key), float):
                value = float(raw)
            else:
                value = raw
        except ValueError as err:
            raise UsageError(f"{key}: cannot parse value {raw!r}") from err
        setattr(cfg, key, value)
    return cfg


def parse_config_file(path: str) -> dict[str, str]:
    """Read ``key = value`` lines; '#' starts a comment, blank lines skipped."""
    flat: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, val = line.split("=", 1)
            flat[key.strip()] = val.strip()
    return flat


def validate_config(cfg: ExperimentConfig) -> None:
    """Range/consistency checks; raises UsageError naming the bad field."""
    checks = [
        (cfg.plant in (PLANT_LINEAR, PLANT_BALLBEAM), f"plant: unknown value {cfg.plant!r}"),
        (cfg.noise in noise_mod.NOISE_KINDS, f"noise: unknown value {cfg.noise!r}"),
        (cfg.cost in COST_KINDS, f"cost: unknown value {cfg.cost!r}"),
        (cfg.mode in MODES, f"mode: unknown value {cfg.mode!r}"),
        (cfg.batch in (BATCH_FIXED, BATCH_DYNAMIC), f"batch: unknown value {cfg.batch!r}"),
        (cfg.rate in (RATE_FIXED, RATE_ADAPTIVE), f"rate: unknown value {cfg.rate!r}"),
        (cfg.horizon >= 0, f"horizon: must be >= 0, got {cfg.horizon}"),
        (cfg.eta0 > 0, f"eta0: must be positive, got {cfg.eta0}"),
        (cfg.gamma > 0, f"gamma: must be positive, got {cfg.gamma}"),
        (cfg.alpha0 > 1, f"alpha0: must exceed 1, got {cfg.alpha0}"),
        (cfg.w_max > 0, f"w_max: must be positive, got {cfg.w_max}"),
        (cfg.switch_cost >= 0, f"switch_cost: must be >= 0, got {cfg.switch_cost}"),
        (len(cfg.seeds) >= 1, "seeds: at least one seed required"),
        (cfg.y_exponent > 0, f"y_exponent: must be positive, got {cfg.y_exponent}"),
        (
            math.hypot(*cfg.x0) > 0 if len(cfg.x0) == 2 else float(np.linalg.norm(cfg.x0)) > 0,
            "x0: the initial state must be nonzero",
        ),
    ]
    for ok, message in checks:
        if not ok:
            raise UsageError(message)
    expected_dim = 2 if cfg.plant == PLANT_LINEAR else 4
    if len(cfg.x0) != expected_dim:
        raise UsageError(f"x0: plant {cfg.plant!r} needs dim {expected_dim}, got {len(cfg.x0)}")
    if cfg.plant == PLANT_LINEAR and cfg.noise == noise_mod.SINUSOIDAL_1D:
        raise UsageError("noise: sinusoidal-1d is scalar; the linear plant needs 2-d noise")
    if cfg.plant == PLANT_BALLBEAM and cfg.noise != noise_mod.SINUSOIDAL_1D:
        raise UsageError("noise: the ball-beam plant takes scalar sinusoidal-1d noise")
    cfg._dynamic_schedule()  # raises ParameterError -> surfaced by caller
    cfg.build_beta()
    cfg.resolve_delta()


# --- presets ---------------------------------------------------------------


def _example1(noise_kind: str, label: str = "example1") -> ExperimentConfig:
    sched = sqrt_batch_schedule(11, shift=10.0, scale=10.0)
    return ExperimentConfig(
        preset=label,
        plant=PLANT_LINEAR,
        noise=noise_kind,
        cost="state-norm-squared",
        horizon=3000,
        eta0=0.025,
        gamma=2.5,
        alpha0=1.01,
        w_max=1.0,
        x0=(100.0, 200.0),
        schedule_kind="polynomial",
        z1=sched.z1,
        z2=sched.z2,
        z3=sched.z3,
        nu=sched.nu,
        beta_kind="exponential",
        beta_rate=0.99,
    )


def _example2(q: float, label: str) -> ExperimentConfig:
    sched = sqrt_batch_schedule(9, shift=41.0, scale=40.0)
    return ExperimentConfig(
        preset=label,
        plant=PLANT_BALLBEAM,
        noise=noise_mod.SINUSOIDAL_1D,
        cost="state-plus-action-norm-squared",
        horizon=5000,
        eta0=0.025,
        gamma=1.5,
        alpha0=1.01,
        w_max=1.0,
        x0=(-32.0, 24.0, 5.6, 24.0),
        schedule_kind="polynomial",
        z1=sched.z1,
        z2=sched.z2,
        z3=sched.z3,
        nu=sched.nu,
        beta_kind="polynomial",
        beta_c=10.0,
        beta_q=q,
    )


def make_preset(name: str) -> ExperimentConfig:
    builders = {
        "example1-sinusoidal": lambda: _example1(noise_mod.SINUSOIDAL_2D),
        "example1-gaussian": lambda: _example1(noise_mod.TRUNCATED_GAUSSIAN),
        "example1-walk": lambda: _example1(noise_mod.UNIFORM_RANDOM_WALK),
        "example2-beta1": lambda: _example2(1.0, "example2-beta1"),
        "example2-beta2": lambda: _example2(1.02, "example2-beta2"),
        "example2-beta3": lambda: _example2(1.05, "example2-beta3"),
        "example2-beta4": lambda: _example2(1.08, "example2-beta4"),
    }
    if name not in builders:
        raise UsageError(
            f"preset: unknown name {name!r}; known: {', '.join(sorted(builders))}"
        )
    cfg = builders[name]()
    cfg.preset = name
    return cfg


PRESET_NAMES = (
    "example1-sinusoidal",
    "example1-gaussian",
    "example1-walk",
    "example2-beta1",
    "example2-beta2",
    "example2-beta3",
    "example2-beta4",
)
