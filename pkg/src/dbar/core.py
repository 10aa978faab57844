"""Shared primitives: controller specs, saturation, costs, episode logging."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LINEAR_GAIN = "linear-gain"
NESTED_SATURATING = "nested-saturating"

COST_STATE = "state-norm-squared"
COST_STATE_ACTION = "state-plus-action-norm-squared"
COST_KINDS = (COST_STATE, COST_STATE_ACTION)


class ConfigurationError(ValueError):
    """Plant, controller, or config wiring is inconsistent."""


class ParameterError(ValueError):
    """A numeric parameter is out of its admissible range."""


class UsageError(ValueError):
    """Bad command-line or config-file input; message names the field."""


class ExplosionError(RuntimeError):
    """A state entry left the representable range (NaN or infinity).

    Carries the offending time step once the caller has annotated it.
    """

    def __init__(self, message: str = "non-finite state entry", step: int | None = None):
        super().__init__(message)
        self.step = step


class PoolExhaustedError(RuntimeError):
    """Every candidate controller has been falsified.

    Under the standing assumption that at least one candidate satisfies
    the stability envelope this signals a misconfigured envelope, not a
    normal outcome; callers report it rather than crash.
    """


class InvariantViolation(RuntimeError):
    """An internal algorithm invariant failed; indicates a bug."""


@dataclass(frozen=True)
class ControllerSpec:
    """One immutable member of a candidate controller pool.

    ``kind`` selects the variant: a linear state-feedback gain matrix, or
    a nested-saturating law parameterized by ``(p, k1, k2)``.
    """

    index: int
    kind: str
    gain: tuple[tuple[float, ...], ...] | None = None
    p: float | None = None
    k1: float | None = None
    k2: float | None = None

    def gain_matrix(self) -> np.ndarray:
        if self.kind != LINEAR_GAIN or self.gain is None:
            raise ConfigurationError(f"controller {self.index} has no gain matrix")
        return np.asarray(self.gain, dtype=float)


def saturate(p: float, z: float) -> float:
    """Symmetric saturation: clip ``z`` to the band [-p, p]."""
    if p <= 0:
        raise ParameterError(f"saturation level must be positive, got {p}")
    if z > p:
        return p
    if z < -p:
        return -p
    return float(z)


def nested_saturating_action(p: float, k1: float, k2: float, y) -> float:
    """Scalar action of the nested-saturating law at state ``y`` (dim 4).

    Saturation bands widen with the inverse of eps = 1/sqrt(1+y1^2+y2^2),
    and four linear combinations of the state are clipped inside one
    another, innermost first.
    """
    y1, y2, y3, y4 = (float(y[0]), float(y[1]), float(y[2]), float(y[3]))
    # inv = 1/eps >= 1; going through the inverse avoids dividing by an
    # eps that underflows at astronomically large (pre-explosion) states
    inv = math.sqrt(1.0 + y1 * y1 + y2 * y2)
    z1 = y1 + k1 * y2 + k1 * y3 + y4
    z2 = y2 + k2 * y3 + y4
    z3 = y3 + y4
    z4 = y4
    inner = saturate(p, z1)
    inner = saturate(p * inv, z2 + inner)
    inner = saturate(p * inv * inv, z3 + inner)
    return saturate(p * inv * inv * inv, z4 + inner)


def controller_action(spec: ControllerSpec, state: np.ndarray):
    """Evaluate controller ``spec`` at ``state``.

    Returns a vector for the linear-gain variant and a scalar for the
    nested-saturating variant.
    """
    if spec.kind == LINEAR_GAIN:
        gain = spec.gain_matrix()
        if gain.shape[1] != len(state):
            raise ConfigurationError(
                f"gain expects dim {gain.shape[1]}, state has dim {len(state)}"
            )
        return gain @ state
    if spec.kind == NESTED_SATURATING:
        if len(state) != 4:
            raise ConfigurationError("nested-saturating controller needs a dim-4 state")
        # negative feedback: the raw chain applied with a plus sign feeds
        # the angular-velocity channel back into itself and diverges
        return -nested_saturating_action(spec.p, spec.k1, spec.k2, state)
    raise ConfigurationError(f"unknown controller kind {spec.kind!r}")


def cost_eval(state: np.ndarray, action, kind: str) -> float:
    """Per-step cost: squared state norm, optionally plus squared action norm."""
    if kind not in COST_KINDS:
        raise ConfigurationError(f"unknown cost kind {kind!r}")
    x = np.asarray(state, dtype=float)
    c = float(x @ x)
    if kind == COST_STATE_ACTION:
        u = np.atleast_1d(np.asarray(action, dtype=float))
        c += float(u @ u)
    return c


@dataclass
class StepRecord:
    t: int
    batch: int
    controller: int
    norm: float
    cost: float


@dataclass
class BatchRecord:
    batch: int
    t_start: int
    tau_scheduled: int
    steps: int
    controller: int
    broke: bool
    s_start: int
    s_end: int
    alpha_end: float
    eta: float
    reset: bool
    pool_size: int


@dataclass
class EpisodeLog:
    """Per-step and per-batch history of one closed-loop run."""

    steps: list[StepRecord] = field(default_factory=list)
    batches: list[BatchRecord] = field(default_factory=list)
    exploded: bool = False
    explosion_step: int | None = None
    pool_exhausted: bool = False

    def validate(self, horizon: int | None = None) -> None:
        """Check time/batch bookkeeping consistency; raises on corruption."""
        last_t = None
        for rec in self.steps:
            if last_t is not None and rec.t <= last_t:
                raise InvariantViolation(f"step times not increasing at t={rec.t}")
            last_t = rec.t
        for prev, nxt in zip(self.batches, self.batches[1:]):
            if nxt.t_start != prev.t_start + prev.steps:
                raise InvariantViolation(
                    f"batch {nxt.batch} starts at {nxt.t_start}, "
                    f"expected {prev.t_start + prev.steps}"
                )
        for rec in self.batches:
            if rec.steps > rec.tau_scheduled:
                raise InvariantViolation(f"batch {rec.batch} overran its length")
            hit_horizon = horizon is not None and rec.t_start + rec.steps - 1 >= horizon
            truncated = self.exploded and rec is self.batches[-1]
            if rec.steps < rec.tau_scheduled and not (rec.broke or hit_horizon or truncated):
                raise InvariantViolation(
                    f"batch {rec.batch} ended early without a falsification"
                )
