"""Episode orchestration, the best-stabilizing-controller oracle, metrics.

Pairing discipline: within one seed, every ablation arm and the oracle
consume the identical disturbance path; policy randomness uses a separate
stream keyed by (seed, arm).
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .bandit import BanditState, BatchContext, init_bandit_state, run_batch
from .config import ExperimentConfig, config_to_flat
from .core import (
    COST_STATE_ACTION,
    EpisodeLog,
    ExplosionError,
    InvariantViolation,
    LINEAR_GAIN,
    PoolExhaustedError,
    cost_eval,
)
from .noise import noise_path
from .schedule import delta_default

_POLICY_STREAM_TAG = 202


class OracleUndefinedError(RuntimeError):
    """No pool controller satisfies the stability envelope on this path."""


OUTCOME_COMPLETED = "completed"
OUTCOME_EXPLODED = "exploded"
OUTCOME_POOL_EXHAUSTED = "pool-exhausted"


@dataclass
class EpisodeResult:
    """One arm, one seed: the full log plus derived per-time series."""

    seed: int
    arm: str
    outcome: str
    log: EpisodeLog
    norms: np.ndarray
    running_avg: np.ndarray
    cum_cost: np.ndarray
    switch_cum: np.ndarray
    etas: np.ndarray
    s_values: np.ndarray
    falsified: int
    final_state: BanditState

    @property
    def completed(self) -> bool:
        return self.outcome == OUTCOME_COMPLETED


def _policy_rng(seed: int, arm_slug: str) -> np.random.Generator:
    arm_key = zlib.crc32(arm_slug.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([_POLICY_STREAM_TAG, seed, arm_key]))


def _event_bounds_applicable(config: ExperimentConfig, delta: float) -> bool:
    """Bucket-event guarantees need a contracting envelope over one batch."""
    beta = config.build_beta()
    tau0 = config._dynamic_schedule().tau(0)
    if beta(tau0) >= 1.0:
        return False
    return delta >= delta_default(config.gamma, config.w_max, beta, tau0) * (1 - 1e-12)


def run_episode(
    config: ExperimentConfig, seed: int, noise: np.ndarray | None = None
) -> EpisodeResult:
    """Drive the closed loop from t=0 through the horizon (or termination)."""
    plant = config.build_plant()
    pool = config.build_pool()
    schedule = config.build_schedule()
    beta = config.build_beta()
    delta, _ = config.resolve_delta()
    if noise is None:
        noise = noise_path(config.build_noise_config(seed), config.horizon)
    if len(noise) < config.horizon + 1:
        raise InvariantViolation("noise path shorter than the horizon")

    x = config.x0_array()
    state = init_bandit_state(
        n_arms=len(pool),
        eta0=config.eta0,
        alpha0=config.alpha0,
        delta=delta,
        x0_norm=float(np.linalg.norm(x)),
        y_exponent=config.y_exponent,
    )
    ctx = BatchContext(
        plant=plant,
        pool=pool,
        noise=noise,
        cost_kind=config.cost,
        schedule=schedule,
        beta=beta,
        gamma=config.gamma,
        w_max=config.w_max,
        horizon=config.horizon,
        mode=config.mode,
        adaptive_rate=config.rate == "adaptive",
        strict_bucket_invariants=_event_bounds_applicable(config, delta),
    )
    rng = _policy_rng(seed, config.arm_slug())
    log = EpisodeLog()
    outcome = OUTCOME_COMPLETED
    t = 0
    while t <= config.horizon:
        try:
            _, x, t = run_batch(ctx, state, x, t, rng, log)
        except PoolExhaustedError:
            log.pool_exhausted = True
            outcome = OUTCOME_POOL_EXHAUSTED
            break
        except ExplosionError:
            outcome = OUTCOME_EXPLODED
            break
    log.validate(config.horizon)
    return _build_result(config, seed, outcome, log, state)


def _build_result(config, seed, outcome, log, state) -> EpisodeResult:
    norms = np.array([rec.norm for rec in log.steps])
    costs = np.array([rec.cost for rec in log.steps])
    denom = np.maximum(np.arange(len(norms)), 1)
    running_avg = np.cumsum(norms) / denom
    cum_cost = np.cumsum(costs)

    switch_cum = np.zeros(len(norms))
    for prev, rec in zip(log.batches, log.batches[1:]):
        if rec.controller != prev.controller and rec.t_start < len(switch_cum):
            switch_cum[rec.t_start :] += 1.0

    return EpisodeResult(
        seed=seed,
        arm=config.arm_slug(),
        outcome=outcome,
        log=log,
        norms=norms,
        running_avg=running_avg,
        cum_cost=cum_cost,
        switch_cum=switch_cum,
        etas=np.array([rec.eta for rec in log.batches]),
        s_values=np.array([rec.s_start for rec in log.batches]),
        falsified=state.falsified,
        final_state=state,
    )


# --- oracle ------------------------------------------------------------------


@dataclass
class OracleResult:
    index: int
    total_cost: float
    cum_cost: np.ndarray
    eligible: np.ndarray
    totals: np.ndarray

    @property
    def n_eligible(self) -> int:
        return int(self.eligible.sum())


def _linear_actions(gains: np.ndarray, states: np.ndarray) -> np.ndarray:
    return np.einsum("nij,nj->ni", gains, states)


def _ballbeam_actions(p, k1, k2, states) -> np.ndarray:
    y1, y2, y3, y4 = states[:, 0], states[:, 1], states[:, 2], states[:, 3]
    inv = np.sqrt(1.0 + y1 * y1 + y2 * y2)
    z1 = y1 + k1 * y2 + k1 * y3 + y4
    z2 = y2 + k2 * y3 + y4
    z3 = y3 + y4
    z4 = y4
    inner = np.clip(z1, -p, p)
    lim = p * inv
    inner = np.clip(z2 + inner, -lim, lim)
    lim = p * inv * inv
    inner = np.clip(z3 + inner, -lim, lim)
    lim = p * inv * inv * inv
    return -np.clip(z4 + inner, -lim, lim)


def oracle_trajectory(
    config: ExperimentConfig, seed: int, noise: np.ndarray | None = None
) -> OracleResult:
    """Roll out every pool controller alone on the shared noise path.

    A controller is eligible iff its whole solo trajectory stays inside
    the envelope beta(t)*|x0| + gamma*w_max (non-finite states are never
    eligible); the oracle is the eligible controller of minimal total
    cost.  Raises OracleUndefinedError when nothing qualifies.
    """
    if noise is None:
        noise = noise_path(config.build_noise_config(seed), config.horizon)
    pool = config.build_pool()
    beta = config.build_beta()
    x0 = config.x0_array()
    T = config.horizon
    n = len(pool)
    linear = pool[0].kind == LINEAR_GAIN
    with_action_cost = config.cost == COST_STATE_ACTION

    if linear:
        plant = config.build_plant()
        a_mat, b_mat = plant.a_matrix, plant.b_matrix
        gains = np.stack([spec.gain_matrix() for spec in pool])
    else:
        plant = config.build_plant()
        p = np.array([spec.p for spec in pool])
        k1 = np.array([spec.k1 for spec in pool])
        k2 = np.array([spec.k2 for spec in pool])
        gb = 9.81 * plant.b_const
        denom = plant.b_const * 9.81**2

    states = np.tile(x0, (n, 1))
    alive = np.ones(n, dtype=bool)
    totals = np.zeros(n)
    x0_norm = float(np.linalg.norm(x0))
    beta_vals = beta.values(np.arange(T + 2))
    envelope = beta_vals * x0_norm + config.gamma * config.w_max

    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T + 1):
            if linear:
                actions = _linear_actions(gains, states)
                step_costs = np.einsum("ni,ni->n", states, states)
                if with_action_cost:
                    step_costs = step_costs + np.einsum("ni,ni->n", actions, actions)
            else:
                actions = _ballbeam_actions(p, k1, k2, states)
                step_costs = np.einsum("ni,ni->n", states, states)
                if with_action_cost:
                    step_costs = step_costs + actions * actions
            totals[alive] += step_costs[alive]
            if t == T:
                break
            if linear:
                states = states @ a_mat.T + actions @ b_mat.T + noise[t]
            else:
                accel = (
                    gb * np.sin(states[:, 2] / gb)
                    + states[:, 0] * states[:, 3] ** 2 / denom
                    + plant.noise_gain * noise[t]
                )
                states = states + plant.dt * np.column_stack(
                    [states[:, 1], accel, states[:, 3], actions]
                )
            norms = np.sqrt(np.einsum("ni,ni->n", states, states))
            ok = np.isfinite(norms) & (norms <= envelope[t + 1])
            alive &= ok
            states[~alive] = 0.0

    if not alive.any():
        raise OracleUndefinedError(
            "no controller satisfies the stability envelope on this noise path"
        )
    totals_masked = np.where(alive, totals, np.inf)
    best = int(np.argmin(totals_masked))
    cum = _solo_rollout(config, pool[best], noise)
    if not math.isclose(cum[-1], totals[best], rel_tol=1e-9, abs_tol=1e-9):
        raise InvariantViolation("oracle rollout mismatch between passes")
    return OracleResult(
        index=best,
        total_cost=float(totals[best]),
        cum_cost=cum,
        eligible=alive,
        totals=totals_masked,
    )


def _solo_rollout(config: ExperimentConfig, spec, noise) -> np.ndarray:
    """Cumulative cost series of one controller run alone from x0."""
    from .core import controller_action

    plant = config.build_plant()
    x = config.x0_array()
    cum = np.zeros(config.horizon + 1)
    acc = 0.0
    for t in range(config.horizon + 1):
        u = controller_action(spec, x)
        acc += cost_eval(x, u, config.cost)
        cum[t] = acc
        if t < config.horizon:
            x = plant.step(x, u, noise[t])
    return cum


# --- metrics -----------------------------------------------------------------


def regret_series(
    algo_cum: np.ndarray,
    oracle_cum: np.ndarray,
    switch_cum: np.ndarray | None = None,
    switch_cost: float = 0.0,
    include_switching: bool = False,
) -> np.ndarray:
    """Pointwise cumulative regret; optionally adds the switching penalty.

    The switching term charges switch_cost per controller change on the
    algorithm side; the single-controller baseline contributes no
    switches.
    """
    if len(algo_cum) != len(oracle_cum):
        raise InvariantViolation(
            f"regret horizon mismatch: {len(algo_cum)} vs {len(oracle_cum)}"
        )
    regret = algo_cum - oracle_cum
    if include_switching:
        if switch_cum is None or len(switch_cum) != len(algo_cum):
            raise InvariantViolation("switching regret needs a switch-count series")
        regret = regret + switch_cost * switch_cum
    return regret


@dataclass
class StabilityReport:
    final_running_avg: float
    bound: float
    below_bound: bool
    at_bound: bool
    settle_time: int | None
    max_norm: float
    break_count: int
    falsified: int
    bucket_changes: int
    bucket_change_bound: int
    nonzero_s_batches: int
    nonzero_s_bound: float
    events_applicable: bool
    events_ok: bool

    def summary(self) -> str:
        flag = "at-bound" if self.at_bound else ("ok" if self.below_bound else "ABOVE")
        events = (
            "n/a"
            if not self.events_applicable
            else ("pass" if self.events_ok else "FAIL")
        )
        return (
            f"avg |x| = {self.final_running_avg:.4g} vs {self.bound:.4g} [{flag}], "
            f"max |x| = {self.max_norm:.4g}, falsified = {self.falsified}, "
            f"event bounds [{events}]"
        )


def stability_report(
    result: EpisodeResult, config: ExperimentConfig
) -> StabilityReport:
    """Stability metrics and bucket-event counts with their bounds."""
    avg = result.running_avg
    bound = config.gamma * config.w_max
    above = np.flatnonzero(avg > bound)
    settle = int(above[-1]) + 1 if len(above) else 0
    if settle >= len(avg):
        settle = None

    state = result.final_state
    u_count = state.falsified
    bucket_changes = len(state.bucket_change_batches)
    nonzero_s = int(np.count_nonzero(result.s_values))

    delta, _ = config.resolve_delta()
    beta = config.build_beta()
    tau0 = config._dynamic_schedule().tau(0)
    applicable = _event_bounds_applicable(config, delta)
    if applicable and u_count > 0:
        alpha_max = max(rec.alpha_end for rec in result.log.batches)
        s_bound = 2.0 * u_count * math.ceil(
            math.log(alpha_max + delta / state.x0_norm) / (-math.log(beta(tau0)))
        )
    else:
        s_bound = 0.0 if applicable else math.inf
    events_ok = bucket_changes <= 2 * u_count and nonzero_s <= s_bound

    return StabilityReport(
        final_running_avg=float(avg[-1]),
        bound=bound,
        below_bound=bool(avg[-1] <= bound),
        at_bound=bool(avg[-1] == bound),
        settle_time=settle,
        max_norm=float(result.norms.max()),
        break_count=u_count,
        falsified=u_count,
        bucket_changes=bucket_changes,
        bucket_change_bound=2 * u_count,
        nonzero_s_batches=nonzero_s,
        nonzero_s_bound=float(s_bound),
        events_applicable=applicable,
        events_ok=bool(events_ok),
    )


def check_event_bounds(result: EpisodeResult, config: ExperimentConfig) -> None:
    """Raise when an applicable bucket-event bound is violated."""
    report = stability_report(result, config)
    if report.events_applicable and not report.events_ok:
        raise InvariantViolation(
            f"bucket-event bounds violated: {report.bucket_changes} changes vs "
            f"{report.bucket_change_bound}, {report.nonzero_s_batches} nonzero-s "
            f"batches vs {report.nonzero_s_bound}"
        )


# --- seed sweeps -------------------------------------------------------------


@dataclass
class SeedOutcome:
    seed: int
    result: EpisodeResult
    report: StabilityReport
    regret: np.ndarray | None
    oracle_index: int | None
    oracle_undefined: bool = False


def run_seed(
    config: ExperimentConfig,
    seed: int,
    noise: np.ndarray | None = None,
    oracle: OracleResult | None = None,
    with_regret: bool = True,
) -> SeedOutcome:
    """One seed of one arm, with the paired-oracle regret when requested.

    An undefined oracle (no envelope-eligible controller on this noise
    path) is reported on the outcome instead of raised, so stability
    results survive configs whose envelope no pool member satisfies.
    """
    if noise is None:
        noise = noise_path(config.build_noise_config(seed), config.horizon)
    result = run_episode(config, seed, noise=noise)
    check_event_bounds(result, config)
    report = stability_report(result, config)
    regret = None
    oracle_index = None
    oracle_undefined = False
    if with_regret and result.completed:
        try:
            if oracle is None:
                oracle = oracle_trajectory(config, seed, noise=noise)
        except OracleUndefinedError:
            oracle_undefined = True
        else:
            oracle_index = oracle.index
            regret = regret_series(
                result.cum_cost,
                oracle.cum_cost,
                switch_cum=result.switch_cum,
                switch_cost=config.switch_cost,
                include_switching=config.mode == "alg3",
            )
    return SeedOutcome(
        seed=seed,
        result=result,
        report=report,
        regret=regret,
        oracle_index=oracle_index,
        oracle_undefined=oracle_undefined,
    )


def precompute_oracles(
    config: ExperimentConfig, seeds: tuple[int, ...]
) -> dict[int, OracleResult | None]:
    """Per-seed oracles, shared across ablation arms.

    The oracle depends only on plant, pool, envelope, and the noise path;
    deterministic noise kinds give every seed the same path, so one
    computation fans out.  ``None`` marks seeds with no eligible
    controller.
    """
    from .noise import SINUSOIDAL_1D, SINUSOIDAL_2D

    def compute(seed: int) -> OracleResult | None:
        try:
            return oracle_trajectory(config, seed)
        except OracleUndefinedError:
            return None

    if config.noise in (SINUSOIDAL_1D, SINUSOIDAL_2D):
        shared = compute(seeds[0])
        return {seed: shared for seed in seeds}
    return {seed: compute(seed) for seed in seeds}


def _run_seed_cached(config, seed, with_regret, oracles):
    if not with_regret:
        return run_seed(config, seed, with_regret=False)
    if oracles is not None and seed in oracles:
        oracle = oracles[seed]
        if oracle is None:
            outcome = run_seed(config, seed, with_regret=False)
            outcome.oracle_undefined = True
            return outcome
        return run_seed(config, seed, oracle=oracle)
    return run_seed(config, seed, with_regret=True)


def _seed_job(args):
    flat, seed, with_regret, oracles = args
    from .config import config_from_flat

    config = config_from_flat(flat)
    return _run_seed_cached(config, seed, with_regret, oracles)


def seed_sweep(
    config: ExperimentConfig,
    seeds: tuple[int, ...],
    with_regret: bool = True,
    jobs: int = 1,
    oracles: dict[int, OracleResult | None] | None = None,
) -> list[SeedOutcome]:
    """Independent episodes per seed; jobs > 1 fans out to worker processes."""
    seeds = tuple(seeds)
    if jobs > 1:
        flat = config_to_flat(config)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(
                pool.map(_seed_job, [(flat, s, with_regret, oracles) for s in seeds])
            )
    return [_run_seed_cached(config, s, with_regret, oracles) for s in seeds]


@dataclass
class AggregateSeries:
    """Across-seed mean and standard error on a shared time axis."""

    t: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    included_seeds: tuple[int, ...]
    excluded_seeds: tuple[int, ...]

    @property
    def lo95(self) -> np.ndarray:
        return self.mean - 1.96 * self.se

    @property
    def hi95(self) -> np.ndarray:
        return self.mean + 1.96 * self.se


def aggregate_series(
    outcomes: list[SeedOutcome], metric: str
) -> AggregateSeries:
    """Reduce one metric across seeds; seeds reduce in sorted order.

    Exploded or terminated seeds are excluded (and reported); metric is
    "stability" (running average of the state norm) or "regret".
    """
    usable, excluded = [], []
    for out in sorted(outcomes, key=lambda o: o.seed):
        series = out.result.running_avg if metric == "stability" else out.regret
        if out.result.completed and series is not None:
            usable.append((out.seed, series))
        else:
            excluded.append(out.seed)
    if not usable:
        raise InvariantViolation(f"no usable seeds for metric {metric!r}")
    stacked = np.vstack([series for _, series in usable])
    mean = stacked.mean(axis=0)
    if len(usable) > 1:
        se = stacked.std(axis=0, ddof=1) / math.sqrt(len(usable))
    else:
        se = np.zeros_like(mean)
    return AggregateSeries(
        t=np.arange(stacked.shape[1]),
        mean=mean,
        se=se,
        included_seeds=tuple(s for s, _ in usable),
        excluded_seeds=tuple(excluded),
    )


# --- CSV emission --------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def csv_metadata(config: ExperimentConfig, metric: str, agg: AggregateSeries) -> dict:
    meta = dict(config_to_flat(config))
    meta["metric"] = metric
    meta["arm"] = config.arm_slug()
    meta["arm_label"] = config.arm_label()
    meta["code_version"] = __version__
    meta["included_seeds"] = ",".join(str(s) for s in agg.included_seeds)
    meta["excluded_seeds"] = ",".join(str(s) for s in agg.excluded_seeds)
    return meta


def write_series_csv(path, meta: dict, agg: AggregateSeries) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, val in meta.items():
            fh.write(f"# {key} = {val}\n")
        fh.write("t,mean,se,lo95,hi95\n")
        lo, hi = agg.lo95, agg.hi95
        for i, t in enumerate(agg.t):
            fh.write(
                f"{int(t)},{_fmt(agg.mean[i])},{_fmt(agg.se[i])},"
                f"{_fmt(lo[i])},{_fmt(hi[i])}\n"
            )


def write_raw_csv(path, meta: dict, outcome: SeedOutcome) -> None:
    res = outcome.result
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, val in meta.items():
            fh.write(f"# {key} = {val}\n")
        fh.write("t,norm,running_avg,cum_cost,regret\n")
        regret = outcome.regret
        for t in range(len(res.norms)):
            r = _fmt(regret[t]) if regret is not None else ""
            fh.write(
                f"{t},{_fmt(res.norms[t])},{_fmt(res.running_avg[t])},"
                f"{_fmt(res.cum_cost[t])},{r}\n"
            )


def read_csv_with_meta(path) -> tuple[dict, np.ndarray]:
    """Parse a CSV produced by this module back into metadata and columns."""
    meta: dict[str, str] = {}
    rows = []
    header = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                key, _, val = line[2:].partition(" = ")
                meta[key] = val
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append([float(v) if v else math.nan for v in line.split(",")])
    return meta, np.array(rows)
