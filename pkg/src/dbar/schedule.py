"""Batch-length schedules, decay envelopes, and precondition checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ParameterError

EXPONENTIAL = "exponential"
POLYNOMIAL = "polynomial"

# Strict bound for the regret precondition ratio*beta(tau0)^2.
REGRET_THRESHOLD = 1.0 / (2.0 * math.sqrt(2.0))


@dataclass(frozen=True)
class BetaEnvelope:
    """Non-increasing decay envelope with value 1 at t=0 and limit 0.

    ``exponential``: beta(t) = rate**t with rate in (0, 1).
    ``polynomial``:  beta(t) = min(c / t**q, 1) with c, q > 0.
    """

    kind: str
    rate: float = 0.0
    c: float = 0.0
    q: float = 0.0

    def __call__(self, t: int) -> float:
        if t < 0:
            raise ParameterError(f"envelope evaluated at negative time {t}")
        if self.kind == EXPONENTIAL:
            return self.rate**t
        if t == 0:
            return 1.0
        return min(self.c / float(t) ** self.q, 1.0)

    def values(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.kind == EXPONENTIAL:
            return self.rate**ts
        out = np.ones_like(ts)
        pos = ts > 0
        out[pos] = np.minimum(self.c / ts[pos] ** self.q, 1.0)
        return out


def exponential_envelope(rate: float) -> BetaEnvelope:
    if not 0.0 < rate < 1.0:
        raise ParameterError(f"exponential envelope rate must be in (0,1), got {rate}")
    return BetaEnvelope(kind=EXPONENTIAL, rate=rate)


def polynomial_envelope(c: float, q: float) -> BetaEnvelope:
    if c <= 0 or q <= 0:
        raise ParameterError(f"polynomial envelope needs c,q > 0, got c={c}, q={q}")
    return BetaEnvelope(kind=POLYNOMIAL, c=c, q=q)


FIXED = "fixed"


@dataclass(frozen=True)
class BatchSchedule:
    """Batch lengths tau_b, either constant or polynomially growing.

    The polynomial form floors at b=0 and ceils afterwards:
    tau_0 = floor(z1 * z2**z3), tau_b = ceil(z1 * (nu*b + z2)**z3).
    """

    kind: str
    tau_fixed: int = 0
    z1: float = 0.0
    z2: float = 0.0
    z3: float = 0.0
    nu: float = 0.0

    def tau(self, b: int) -> int:
        if b < 0:
            raise ParameterError(f"batch index must be >= 0, got {b}")
        if self.kind == FIXED:
            return self.tau_fixed
        if b == 0:
            return int(math.floor(self.z1 * self.z2**self.z3))
        return int(math.ceil(self.z1 * (self.nu * b + self.z2) ** self.z3))

    def taus(self, n: int) -> np.ndarray:
        """Vectorized tau(0..n-1)."""
        if self.kind == FIXED:
            return np.full(n, self.tau_fixed, dtype=np.int64)
        b = np.arange(n, dtype=float)
        vals = np.ceil(self.z1 * (self.nu * b + self.z2) ** self.z3)
        vals[0] = math.floor(self.z1 * self.z2**self.z3)
        return vals.astype(np.int64)


def fixed_schedule(tau: int) -> BatchSchedule:
    if tau < 1:
        raise ParameterError(f"fixed batch length must be >= 1, got {tau}")
    return BatchSchedule(kind=FIXED, tau_fixed=int(tau))


def polynomial_schedule(z1: float, z2: float, z3: float, nu: float) -> BatchSchedule:
    if min(z1, z2, z3, nu) <= 0:
        raise ParameterError("polynomial schedule parameters must be positive")
    sched = BatchSchedule(kind=POLYNOMIAL, z1=z1, z2=z2, z3=z3, nu=nu)
    if sched.tau(0) < 1:
        raise ParameterError(
            f"polynomial schedule has tau_0 = {sched.tau(0)}; z1*z2**z3 is too small"
        )
    return sched


def sqrt_batch_schedule(tau0: int, shift: float, scale: float) -> BatchSchedule:
    """Square-root growth ``tau_b = ceil(tau0*((b+shift)/scale)**0.5)``.

    Maps onto the polynomial form with z1 = tau0/sqrt(scale), z2 = shift,
    z3 = 1/2, nu = 1; the produced tau(0) equals ``tau0`` for the supported
    shift/scale combinations (shift within one unit of scale).
    """
    sched = polynomial_schedule(tau0 / math.sqrt(scale), float(shift), 0.5, 1.0)
    if sched.tau(0) != tau0:
        raise ParameterError(
            f"sqrt schedule maps to tau_0 = {sched.tau(0)} instead of {tau0}"
        )
    return sched


def pool_scaled_schedule(n_arms: int, u_plus_1: int, z: float, nu: float) -> BatchSchedule:
    """Polynomial schedule scaled to the pool: z1 = (n_arms*u_plus_1)**-0.5, z3 = 1/2.

    Balances batch growth against the pool size; pass ``u_plus_1 = 1``
    for the pool-size-only variant used when the number of falsifiable
    controllers is unknown.
    """
    if n_arms < 1 or u_plus_1 < 1:
        raise ParameterError("n_arms and u_plus_1 must be >= 1")
    z1 = 1.0 / math.sqrt(n_arms * u_plus_1)
    return polynomial_schedule(z1, z, 0.5, nu)


def h_partial(beta: BetaEnvelope, t: int) -> float:
    """Partial sum H(t) = sum_{i<t} beta(i); H(0) = 0.

    Correctly-rounded summation keeps the sums exactly non-decreasing
    in t, which pairwise summation does not guarantee at ulp scale.
    """
    if t < 0:
        raise ParameterError(f"partial sum needs t >= 0, got {t}")
    if t == 0:
        return 0.0
    return math.fsum(beta.values(np.arange(t)).tolist())


@dataclass(frozen=True)
class PreconditionReport:
    """Evaluated stability/regret preconditions for a schedule-envelope pair."""

    tau0: int
    tau1: int
    ratio: float
    stability_value: float
    stability_ok: bool
    regret_value: float
    regret_threshold: float
    regret_ok: bool

    def summary(self) -> str:
        s_flag = "pass" if self.stability_ok else "FAIL"
        r_flag = "pass" if self.regret_ok else "FAIL"
        return (
            f"stability: (tau1/tau0)*beta(tau0) = {self.stability_value:.6g} < 1 [{s_flag}]; "
            f"regret: (tau1/tau0)*beta(tau0)^2 = {self.regret_value:.6g} "
            f"< {self.regret_threshold:.6g} [{r_flag}]"
        )


def validate_stability_precondition(
    schedule: BatchSchedule, beta: BetaEnvelope
) -> PreconditionReport:
    """Report both precondition values; never raises, callers decide severity."""
    tau0 = schedule.tau(0)
    tau1 = schedule.tau(1)
    ratio = tau1 / tau0
    b0 = beta(tau0)
    return PreconditionReport(
        tau0=tau0,
        tau1=tau1,
        ratio=ratio,
        stability_value=ratio * b0,
        stability_ok=ratio * b0 < 1.0,
        regret_value=ratio * b0 * b0,
        regret_threshold=REGRET_THRESHOLD,
        regret_ok=ratio * b0 * b0 < REGRET_THRESHOLD,
    )


def delta_default(gamma: float, w_max: float, beta: BetaEnvelope, tau0: int) -> float:
    """Minimal admissible bucket offset gamma*w_max/(1 - beta(tau0))."""
    b0 = beta(tau0)
    if b0 >= 1.0:
        raise ParameterError(
            f"beta(tau0) = {b0} >= 1: the minimal bucket offset is undefined "
            "for this envelope/schedule pairing"
        )
    return gamma * w_max / (1.0 - b0)


@dataclass(frozen=True)
class ScheduleReport:
    """Numerical validity certificate for a batch schedule over a finite horizon."""

    horizon: int
    non_decreasing: bool
    max_ratio: float
    max_ratio_is_first: bool
    final_ratio: float

    @property
    def ok(self) -> bool:
        return self.non_decreasing and self.max_ratio_is_first


def validate_schedule(schedule: BatchSchedule, horizon: int = 100_000) -> ScheduleReport:
    """Check monotonicity and ratio behaviour over the first ``horizon`` batches."""
    taus = schedule.taus(horizon).astype(float)
    ratios = taus[1:] / taus[:-1]
    max_ratio = float(ratios.max()) if len(ratios) else 1.0
    return ScheduleReport(
        horizon=horizon,
        non_decreasing=bool(np.all(np.diff(taus) >= 0)),
        max_ratio=max_ratio,
        max_ratio_is_first=bool(max_ratio <= ratios[0] + 1e-15) if len(ratios) else True,
        final_ratio=float(ratios[-1]) if len(ratios) else 1.0,
    )
