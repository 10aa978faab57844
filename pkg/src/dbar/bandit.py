"""Batched adversarial controller selection with falsification.

One batch = one controller held fixed for tau_b plant steps.  Controllers
whose trajectory escapes the stability envelope are removed permanently
(a "break").  Batch-start state norms are bucketed on a geometric grid
(alpha, s); the learning rate shrinks by alpha**(2s) in unstable regimes
and returns to its initial value when the norm re-enters the base bucket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    BatchRecord,
    ControllerSpec,
    EpisodeLog,
    ExplosionError,
    InvariantViolation,
    PoolExhaustedError,
    StepRecord,
    controller_action,
    cost_eval,
)
from .schedule import BatchSchedule, BetaEnvelope

MODE_ALG1 = "alg1"
MODE_ALG2 = "alg2"
MODE_ALG3 = "alg3"
MODES = (MODE_ALG1, MODE_ALG2, MODE_ALG3)

PROB_SUM_TOL = 1e-12


@dataclass
class BanditState:
    """Mutable per-episode selection state, updated once per batch."""

    active: np.ndarray
    weights: np.ndarray
    probs: np.ndarray
    eta0: float
    eta: float
    alpha: float
    s: int
    mu: int
    y_exponent: float
    delta: float
    x0_norm: float
    batch: int = 0
    falsified: int = 0
    current_controller: int | None = None
    prev_controller: int | None = None
    prev_eta: float = 0.0
    prev_weight_selected: float = 0.0
    prev_s: int = 0
    prev_pool_size: int = 0
    break_batches: list[int] = field(default_factory=list)
    bucket_change_batches: list[int] = field(default_factory=list)
    reset_batches: list[int] = field(default_factory=list)

    @property
    def pool_size(self) -> int:
        return int(self.active.sum())


def init_bandit_state(
    n_arms: int,
    eta0: float,
    alpha0: float,
    delta: float,
    x0_norm: float,
    y_exponent: float = 0.5,
) -> BanditState:
    if eta0 <= 0:
        raise InvariantViolation(f"eta0 must be positive, got {eta0}")
    if alpha0 <= 1.0:
        raise InvariantViolation(f"alpha0 must exceed 1, got {alpha0}")
    if x0_norm <= 0:
        raise InvariantViolation("the initial state must be nonzero")
    return BanditState(
        active=np.ones(n_arms, dtype=bool),
        weights=np.zeros(n_arms),
        probs=np.full(n_arms, 1.0 / n_arms),
        eta0=eta0,
        eta=eta0,
        alpha=alpha0,
        s=0,
        mu=0,
        y_exponent=y_exponent,
        delta=delta,
        x0_norm=x0_norm,
        prev_pool_size=n_arms,
    )


def softmax_distribution(weights: np.ndarray, eta: float) -> np.ndarray:
    """Probabilities proportional to exp(-eta*weights), overflow-safe.

    The weighted losses are shifted by their minimum before
    exponentiation, so arbitrarily large weights map to probability ~0
    instead of NaN.
    """
    w = np.asarray(weights, dtype=float)
    if not np.isfinite(w).all():
        raise InvariantViolation("non-finite weight in softmax")
    shifted = eta * w - (eta * w).min()
    exps = np.exp(-shifted)
    probs = exps / exps.sum()
    if abs(probs.sum() - 1.0) > PROB_SUM_TOL:
        raise InvariantViolation("softmax probabilities do not sum to 1")
    return probs


def sample_from_probs(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw in index order; reproducible under a fixed seed."""
    cdf = np.cumsum(probs)
    u = rng.random()
    idx = int(np.searchsorted(cdf, u, side="right"))
    if idx >= len(probs) or probs[idx] <= 0.0:
        # cdf[-1] can sit a few ulps below 1; fall back to the last arm
        # carrying probability mass
        idx = int(np.flatnonzero(probs > 0.0).max())
    return idx


def sample_controller(state: BanditState, rng: np.random.Generator, mode: str) -> int:
    """Draw the controller for the coming batch.

    alg1/alg2 draw from the softmax distribution.  alg3 keeps the
    previous controller lazily when neither the bucket level nor the pool
    changed, with probability exp(-(eta_b W_b(K) - eta_prev W_prev(K)));
    otherwise it behaves like alg1.
    """
    idxs = np.flatnonzero(state.active)
    if len(idxs) == 0:
        raise PoolExhaustedError(
            "all candidate controllers falsified; the envelope is inconsistent "
            "with the pool"
        )
    if (
        mode == MODE_ALG3
        and state.batch > 0
        and state.prev_controller is not None
        and state.s == state.prev_s
        and state.pool_size == state.prev_pool_size
    ):
        prev = state.prev_controller
        log_stay = -(
            state.eta * state.weights[prev]
            - state.prev_eta * state.prev_weight_selected
        )
        stay_p = math.exp(min(log_stay, 0.0))
        if rng.random() < stay_p:
            return prev
    active_probs = state.probs[idxs]
    return int(idxs[sample_from_probs(active_probs, rng)])


def iss_violation(
    x_next_norm: float,
    x_batch_start_norm: float,
    offset: int,
    beta: BetaEnvelope,
    gamma: float,
    w_max: float,
) -> bool:
    """True iff the observed norm strictly exceeds the stability envelope."""
    if offset < 1:
        raise InvariantViolation(f"envelope check needs offset >= 1, got {offset}")
    return x_next_norm > beta(offset) * x_batch_start_norm + gamma * w_max


def bucket_update(
    x_next_norm: float, alpha: float, s: int, delta: float, x0_norm: float
) -> tuple[float, int]:
    """Re-bucket the batch-end state norm on the geometric grid.

    Below the threshold alpha*x0_norm + delta the bucket resets to zero.
    Otherwise s is the grid level with alpha**s <= R < alpha**(s+1) for
    R = (x_next_norm - delta)/x0_norm; a climb of more than one level is
    capped by widening the base to the geometric midpoint of the interval
    of admissible bases, keeping the level at s+1.
    """
    if alpha <= 1.0:
        raise InvariantViolation(f"bucket base must exceed 1, got {alpha}")
    if x0_norm <= 0:
        raise InvariantViolation("bucket update needs a nonzero initial norm")
    if not math.isfinite(x_next_norm):
        raise InvariantViolation("bucket update received a non-finite norm")
    # guard and grid placement share the ratio form so rounding cannot put
    # the result between the two branches' postconditions
    ratio = (x_next_norm - delta) / x0_norm
    if ratio < alpha:
        return alpha, 0
    s_new = int(math.floor(math.log(ratio) / math.log(alpha)))
    # log+floor can be off by one at exact powers
    if alpha ** (s_new + 1) <= ratio:
        s_new += 1
    elif alpha**s_new > ratio:
        s_new -= 1
    s_new = max(s_new, 1)
    if s_new - s <= 1:
        return alpha, s_new
    exponent = (2 * s + 3) / (2.0 * (s + 1) * (s + 2))
    return ratio**exponent, s + 1


def weight_update(
    weights: np.ndarray,
    probs: np.ndarray,
    selected: int,
    batch_cost: float,
    s_changed: bool,
) -> np.ndarray:
    """Importance-weighted accumulation, or a full reset on a bucket change.

    Only the selected arm receives the estimate batch_cost/p(selected);
    whenever the bucket level changed, every weight resets to zero.
    """
    if s_changed:
        return np.zeros_like(weights)
    p_sel = probs[selected]
    if p_sel <= 0:
        raise InvariantViolation("selected arm has zero probability")
    new = weights.copy()
    new[selected] += batch_cost / p_sel
    return new


def rate_update(
    eta0: float,
    alpha_next: float,
    s_next: int,
    mode: str,
    mu: int,
    y_exponent: float,
    break_fired: bool,
) -> tuple[float, int]:
    """Next learning rate (and break counter, used only by alg2).

    alg1/alg3: eta0 / alpha_next**(2*s_next).  alg2 additionally scales
    by (mu+1)**y with mu counting falsifications so far.
    """
    if mode == MODE_ALG2:
        mu_next = mu + 1 if break_fired else mu
        return eta0 * (mu_next + 1) ** y_exponent / alpha_next ** (2 * s_next), mu_next
    return eta0 / alpha_next ** (2 * s_next), mu


@dataclass(frozen=True)
class BatchOutcome:
    controller: int
    steps: int
    cost: float
    broke: bool
    final_norm: float


@dataclass(frozen=True)
class BatchContext:
    """Everything a batch needs besides the mutable bandit state."""

    plant: object
    pool: list[ControllerSpec]
    noise: np.ndarray
    cost_kind: str
    schedule: BatchSchedule
    beta: BetaEnvelope
    gamma: float
    w_max: float
    horizon: int
    mode: str = MODE_ALG1
    adaptive_rate: bool = True
    # Bucket-count guarantees only hold when the envelope contracts over
    # one batch and delta absorbs the noise; checks degrade to reporting
    # otherwise.
    strict_bucket_invariants: bool = True


def run_batch(
    ctx: BatchContext,
    state: BanditState,
    x: np.ndarray,
    t: int,
    rng: np.random.Generator,
    log: EpisodeLog,
) -> tuple[BatchOutcome, np.ndarray, int]:
    """Execute one full batch: sample, roll the plant, update the learner.

    Returns the outcome, the state at the next batch start, and the next
    start time.  Raises PoolExhaustedError when no controller remains and
    ExplosionError (annotated with the step) when the plant diverges
    beyond double precision.
    """
    k = sample_controller(state, rng, ctx.mode)
    state.current_controller = k
    spec = ctx.pool[k]
    b = state.batch
    tau_b = ctx.schedule.tau(b)
    t_start = t
    with np.errstate(over="ignore", invalid="ignore"):
        start_norm = float(math.sqrt(float(x @ x)))
    eta_b = state.eta
    probs_b = state.probs.copy()
    s_b = state.s

    batch_cost = 0.0
    broke = False
    steps = 0
    horizon_truncated = t_start + tau_b - 1 > ctx.horizon
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(t_start, min(t_start + tau_b - 1, ctx.horizon) + 1):
            u = controller_action(spec, x)
            step_cost = cost_eval(x, u, ctx.cost_kind)
            if not math.isfinite(step_cost):
                # norm or action magnitude beyond double precision: the
                # trajectory is numerically unusable from here on
                _abort_exploded(log, state, b, t_start, tau_b, steps, k, broke, s_b, eta_b, t)
            log.steps.append(
                StepRecord(
                    t=t, batch=b, controller=k, norm=math.sqrt(float(x @ x)), cost=step_cost
                )
            )
            batch_cost += step_cost
            try:
                x_next = ctx.plant.step(x, u, ctx.noise[t])
            except ExplosionError as err:
                err.step = t
                steps += 1
                _abort_exploded(log, state, b, t_start, tau_b, steps, k, broke, s_b, eta_b, t, err)
            steps += 1
            x = x_next
            norm_sq = float(x @ x)
            if not math.isfinite(norm_sq):
                _abort_exploded(log, state, b, t_start, tau_b, steps, k, broke, s_b, eta_b, t)
            offset = t + 1 - t_start
            if iss_violation(
                math.sqrt(norm_sq), start_norm, offset, ctx.beta, ctx.gamma, ctx.w_max
            ):
                state.active[k] = False
                state.falsified += 1
                state.break_batches.append(b)
                broke = True
                break
        t_next = t + 1
        end_norm = float(np.linalg.norm(x))

    alpha_next, s_next = bucket_update(
        end_norm, state.alpha, s_b, state.delta, state.x0_norm
    )
    _check_bucket_invariants(
        ctx, state, b, broke or horizon_truncated, end_norm, alpha_next, s_next
    )

    s_changed = s_next != s_b
    reset = s_changed and ctx.adaptive_rate
    if s_changed:
        state.bucket_change_batches.append(b)
    if reset:
        state.reset_batches.append(b)

    new_weights = weight_update(state.weights, probs_b, k, batch_cost, reset)
    if reset and np.abs(new_weights).max() != 0.0:
        raise InvariantViolation("weight reset left a nonzero weight")

    if ctx.adaptive_rate:
        eta_next, mu_next = rate_update(
            state.eta0, alpha_next, s_next, ctx.mode, state.mu, state.y_exponent, broke
        )
    else:
        eta_next, mu_next = state.eta0, state.mu
    if ctx.mode != MODE_ALG2:
        if eta_next > state.eta0 * (1.0 + 1e-15):
            raise InvariantViolation("learning rate exceeded its initial value")
        if s_next == 0 and eta_next != state.eta0:
            raise InvariantViolation("rate did not return to eta0 at bucket level 0")

    state.prev_controller = k
    state.prev_eta = eta_b
    # the lazy-switching gate compares against the weight that formed this
    # batch's distribution, i.e. the value before the update above
    state.prev_weight_selected = float(state.weights[k])
    state.prev_s = s_b
    state.prev_pool_size = int(np.count_nonzero(state.active)) + (1 if broke else 0)

    state.weights = new_weights
    state.alpha = alpha_next
    state.s = s_next
    state.mu = mu_next
    state.eta = eta_next
    state.batch = b + 1

    active_idx = np.flatnonzero(state.active)
    state.probs = np.zeros_like(state.probs)
    if len(active_idx):
        state.probs[active_idx] = softmax_distribution(new_weights[active_idx], eta_next)

    _record_batch(log, state, b, t_start, tau_b, steps, k, broke, s_b, reset, eta_b)
    return (
        BatchOutcome(controller=k, steps=steps, cost=batch_cost, broke=broke, final_norm=end_norm),
        x,
        t_next,
    )


def _abort_exploded(log, state, b, t_start, tau_b, steps, k, broke, s_b, eta_b, t, err=None):
    log.exploded = True
    log.explosion_step = t
    _record_batch(log, state, b, t_start, tau_b, steps, k, broke, s_b, False, eta_b)
    if err is None:
        err = ExplosionError(step=t)
    raise err


def _check_bucket_invariants(ctx, state, b, exempt, end_norm, alpha_next, s_next):
    # ``exempt`` covers batches that broke or were cut short by the horizon;
    # only full, break-free batches are guaranteed not to raise the level.
    if s_next > state.s + 1:
        raise InvariantViolation(f"bucket level climbed by more than 1 at batch {b}")
    if alpha_next < state.alpha:
        raise InvariantViolation(f"bucket base decreased at batch {b}")
    if ctx.strict_bucket_invariants and not exempt and s_next > state.s:
        raise InvariantViolation(
            f"bucket level rose without a falsification at batch {b}"
        )
    # end_norm must sit below the next bucket's upper edge (ratio form,
    # matching the arithmetic inside bucket_update)
    ratio = (end_norm - state.delta) / state.x0_norm
    if s_next == 0:
        ok = ratio < alpha_next
    else:
        ok = alpha_next**s_next <= ratio < alpha_next ** (s_next + 1)
    if not ok:
        raise InvariantViolation(f"bucket bounds violated at batch {b}")


def _record_batch(log, state, b, t_start, tau_b, steps, k, broke, s_b, reset, eta_b):
    log.batches.append(
        BatchRecord(
            batch=b,
            t_start=t_start,
            tau_scheduled=tau_b,
            steps=steps,
            controller=k,
            broke=broke,
            s_start=s_b,
            s_end=state.s,
            alpha_end=state.alpha,
            eta=eta_b,
            reset=reset,
            pool_size=int(np.count_nonzero(state.active)) + (1 if broke else 0),
        )
    )
