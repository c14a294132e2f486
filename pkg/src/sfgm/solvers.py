"""Fast gradient methods driven by (generalized) estimating sequences.

A single state machine covers the plain fast gradient method and the variant
whose estimating functions carry a heavy-ball style memory of earlier
scanning quadratics.  Each iteration:

    S      = sum_i beta_i * gamma_i                  (memory mass)
    alpha  = positive root of L a^2 + (gamma - mu - S) a - gamma = 0
    gamma' = (1 - alpha) gamma + alpha (mu + S)      (= L alpha^2)
    y      = weighted mean of x, v and the remembered centers v_i
    x'     = y - grad f(y) / L
    v'     = ((1 - alpha) gamma v + alpha (mu y - grad f(y) + sum beta_i gamma_i v_i)) / gamma'

With every beta zero this is the constant-step fast gradient method; gamma_0
selects between its CSS1 (gamma_0 = L) and CSS3 (gamma_0 = mu) flavours.  The
plain gradient method is provided as a baseline and bypasses the machinery.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DegenerateAlpha,
    DegenerateGamma,
    DegenerateY,
    InfeasibleBeta,
    SolverStall,
)

logger = logging.getLogger(__name__)

FEASIBILITY_SLACK = 1e-12
_CLAMP_REPORT = 1e-9


class Method(enum.Enum):
    GM = "gm"
    FGM_CSS1 = "fgm-css1"
    FGM_CSS3 = "fgm-css3"
    SFGM = "sfgm"


class BetaKind(enum.Enum):
    ZERO = "zero"
    FIRST_TERM = "first"
    LAST_TERM = "last"
    WINDOW = "window"


class StopKind(enum.Enum):
    GRAD_NORM = "grad_norm"
    DIST_TO_OPT = "dist_to_opt"
    MAX_ITERS = "max_iters"


GRAD_NORM = StopKind.GRAD_NORM
DIST_TO_OPT = StopKind.DIST_TO_OPT
MAX_ITERS = StopKind.MAX_ITERS


@dataclass(frozen=True)
class MemoryEntry:
    """A remembered scanning quadratic ``(gamma_i, v_i)`` and its current weight."""

    index: int
    gamma: float
    v: np.ndarray
    beta: float = 1.0


@dataclass(frozen=True)
class BetaSchedule:
    """Rule producing the memory weights ``beta_{i,k}``.

    ``ZERO`` keeps nothing.  ``FIRST_TERM`` keeps ``(gamma_0, v_0)`` with weight
    one.  ``LAST_TERM`` keeps ``(gamma_{k-1}, v_{k-1})`` with weight
    ``min(1, mu / gamma_{k-1})``.  ``WINDOW`` keeps the last ``window`` pairs
    with a common weight ``min(1, cap / sum gamma_i)``.

    When ``clamp`` is set, weights whose mass exceeds ``min(gamma_k, mu, L - mu)``
    are scaled down onto that cap; otherwise :class:`InfeasibleBeta` is raised.
    """

    kind: BetaKind = BetaKind.ZERO
    window: int = 1
    clamp: bool = True

    def __post_init__(self):
        if self.kind is BetaKind.WINDOW and self.window < 1:
            raise ConfigError("window must be a positive integer")

    def remember(self, history, k, gamma_k, v_k):
        entry = MemoryEntry(k, gamma_k, v_k)
        if self.kind is BetaKind.ZERO:
            return ()
        if self.kind is BetaKind.FIRST_TERM:
            return history if history else (entry,)
        if self.kind is BetaKind.LAST_TERM:
            return (entry,)
        return (tuple(history) + (entry,))[-self.window:]

    def raw_weights(self, history, gamma_k, mu, L):
        if not history or self.kind is BetaKind.ZERO:
            return []
        if self.kind is BetaKind.FIRST_TERM:
            return [1.0]
        if self.kind is BetaKind.LAST_TERM:
            g = history[-1].gamma
            return [1.0 if g <= 0 else min(1.0, mu / g)]
        total = sum(e.gamma for e in history)
        cap = feasibility_cap(gamma_k, mu, L)
        c = 1.0 if total <= 0 else min(1.0, cap / total)
        return [c] * len(history)

    def weights(self, history, gamma_k, mu, L):
        """Feasible weights for the current history; returns ``(betas, clamped)``."""
        betas = self.raw_weights(history, gamma_k, mu, L)
        if not betas:
            return betas, False
        mass = sum(b * e.gamma for b, e in zip(betas, history))
        cap = feasibility_cap(gamma_k, mu, L)
        if mass <= cap:
            return betas, False
        if not self.clamp:
            raise InfeasibleBeta(f"memory mass {mass!r} exceeds min(gamma_k, mu) = {cap!r}")
        if mass - cap > _CLAMP_REPORT * max(1.0, cap):
            logger.debug("memory mass %.6g clamped to %.6g", mass, cap)
        scale = cap / mass
        return [b * scale for b in betas], True


ZERO = BetaSchedule(BetaKind.ZERO)
FIRST_TERM = BetaSchedule(BetaKind.FIRST_TERM)
LAST_TERM = BetaSchedule(BetaKind.LAST_TERM)


def window(w: int, clamp: bool = True) -> BetaSchedule:
    return BetaSchedule(BetaKind.WINDOW, window=w, clamp=clamp)


def feasibility_cap(gamma_k, mu, L):
    # L - mu keeps the root alpha inside [0, 1]
    return max(0.0, min(gamma_k, mu, L - mu))


@dataclass(frozen=True)
class StoppingRule:
    """``GRAD_NORM``: ``||grad f(y_k)|| <= threshold``.  ``DIST_TO_OPT``:
    ``||x_k - x*|| <= threshold * ||x_0 - x*||``.  ``MAX_ITERS``: never fires."""

    kind: StopKind = MAX_ITERS
    threshold: float = 1.0

    def __post_init__(self):
        if not self.threshold > 0:
            raise ConfigError("stopping threshold must be positive")


@dataclass(frozen=True)
class SolverConfig:
    method: Method
    beta: BetaSchedule = ZERO
    gamma0: float = 0.0
    step: Optional[float] = None  # None means 1/L
    stop: StoppingRule = StoppingRule()
    max_iters: int = 10_000
    stall_check: bool = True
    label: str = ""

    PRESETS = ("gm", "fgm-css1", "fgm-css3", "sfgm-memless", "sfgm-last")

    @classmethod
    def preset(cls, label, oracle, **kw):
        """Configurations benchmarked in the experiments, keyed by CLI label."""
        L, mu = oracle.lipschitz, oracle.strong_convexity
        table = {
            "gm": dict(method=Method.GM),
            "fgm-css1": dict(method=Method.FGM_CSS1, gamma0=L),
            "fgm-css3": dict(method=Method.FGM_CSS3, gamma0=mu),
            "sfgm-memless": dict(method=Method.SFGM, beta=FIRST_TERM, gamma0=0.0),
            "sfgm-last": dict(method=Method.SFGM, beta=LAST_TERM, gamma0=0.0),
        }
        if label not in table:
            raise ConfigError(f"unknown method {label!r}; choose from {', '.join(table)}")
        params = {**table[label], "label": label, **kw}
        return cls(**params)

    @property
    def name(self):
        return self.label or self.method.value

    def validate(self, oracle):
        L, mu = oracle.lipschitz, oracle.strong_convexity
        if self.max_iters < 0:
            raise ConfigError("max_iters must be nonnegative")
        if self.step is not None and not self.step > 0:
            raise ConfigError("step must be positive")
        if self.method is Method.GM:
            return
        if self.gamma0 < 0:
            raise ConfigError("gamma0 must be nonnegative")
        if self.method is Method.FGM_CSS1:
            if not math.isclose(self.gamma0, L, rel_tol=1e-12) or self.beta.kind is not BetaKind.ZERO:
                raise ConfigError("FGM CSS1 requires gamma0 = L and zero memory weights")
        if self.method is Method.FGM_CSS3:
            if not math.isclose(self.gamma0, mu, rel_tol=1e-12) or self.beta.kind is not BetaKind.ZERO:
                raise ConfigError("FGM CSS3 requires gamma0 = mu and zero memory weights")
        if self.gamma0 == 0 and mu == 0:
            raise ConfigError("gamma0 = 0 needs mu > 0, otherwise alpha stays at zero")


@dataclass(frozen=True)
class SolverState:
    k: int
    x: np.ndarray
    v: np.ndarray
    gamma: float
    alpha_prev: float = 0.0
    lam: float = 1.0
    memory: tuple = ()  # entries weighted in the last step
    history: tuple = ()  # candidates for the next step
    beta_mass: float = 0.0
    y_last: Optional[np.ndarray] = None
    grad_last: Optional[np.ndarray] = None
    f_last: float = float("nan")  # f(y_k)
    clamped: int = 0


def initial_state(config: SolverConfig, x0) -> SolverState:
    x0 = np.array(x0, dtype=float)
    gamma0 = float("nan") if config.method is Method.GM else float(config.gamma0)
    return SolverState(k=0, x=x0, v=x0, gamma=gamma0,
                       alpha_prev=float("nan") if config.method is Method.GM else 0.0)


def compute_alpha(gamma_k: float, S: float, mu: float, L: float) -> float:
    """Nonnegative root of ``L a^2 + (gamma_k - mu - S) a - gamma_k = 0``, clipped to [0, 1]."""
    if not L > 0:
        raise ValueError("L must be positive")
    if gamma_k == 0 and S == 0 and mu == 0:
        raise DegenerateAlpha("gamma_k, S and mu are all zero; the method cannot progress")
    b = mu + S - gamma_k
    sq = math.sqrt(b * b + 4.0 * L * gamma_k)
    # pick the cancellation-free form of the root
    alpha = (b + sq) / (2.0 * L) if b >= 0 else 2.0 * gamma_k / (sq - b)
    return min(1.0, max(0.0, alpha))


def advance_gamma(gamma_k: float, alpha: float, S: float, mu: float) -> float:
    return (1.0 - alpha) * gamma_k + alpha * (mu + S)


def compute_y(x, v, memory: Sequence[MemoryEntry], gamma_k, gamma_next, alpha):
    num = gamma_next * x + (alpha * gamma_k) * v
    den = gamma_next + alpha * gamma_k
    a2 = alpha * alpha
    for e in memory:
        w = a2 * e.beta * e.gamma
        if w:
            num = num + w * e.v
            den += w
    if not den > 0:
        raise DegenerateY(f"denominator of the y-average is {den!r}")
    return num / den


def gradient_step(y, grad, L: float, h: Optional[float] = None):
    return y - (1.0 / L if h is None else h) * grad


def advance_v(v, y, grad, memory: Sequence[MemoryEntry], gamma_k, gamma_next, alpha, mu):
    """Center update with the 1/mu factors cancelled, finite for any mu >= 0."""
    if not gamma_next > 0:
        raise DegenerateGamma(f"gamma_(k+1) = {gamma_next!r} must be positive")
    inner = mu * y - grad
    for e in memory:
        w = e.beta * e.gamma
        if w:
            inner = inner + w * e.v
    return ((1.0 - alpha) * gamma_k * v + alpha * inner) / gamma_next


def step(state: SolverState, oracle, config: SolverConfig) -> SolverState:
    """One iteration; exactly one gradient evaluation."""
    L, mu = oracle.lipschitz, oracle.strong_convexity

    if config.method is Method.GM:
        f_y, g = oracle.value_and_gradient(state.x)
        x_next = gradient_step(state.x, g, L, config.step)
        return dataclasses.replace(state, k=state.k + 1, x=x_next, v=x_next,
                                   y_last=state.x, grad_last=g, f_last=f_y)

    betas, clamped = config.beta.weights(state.history, state.gamma, mu, L)
    memory = tuple(dataclasses.replace(e, beta=b)
                   for e, b in zip(state.history, betas) if b != 0.0)
    S = sum(e.beta * e.gamma for e in memory)

    alpha = compute_alpha(state.gamma, S, mu, L)
    gamma_next = advance_gamma(state.gamma, alpha, S, mu)
    y = compute_y(state.x, state.v, memory, state.gamma, gamma_next, alpha)
    f_y, g = oracle.value_and_gradient(y)
    x_next = gradient_step(y, g, L, config.step)
    v_next = advance_v(state.v, y, g, memory, state.gamma, gamma_next, alpha, mu)
    history = config.beta.remember(state.history, state.k, state.gamma, state.v)

    return SolverState(
        k=state.k + 1, x=x_next, v=v_next, gamma=gamma_next, alpha_prev=alpha,
        lam=(1.0 - alpha) * state.lam, memory=memory, history=history, beta_mass=S,
        y_last=y, grad_last=g, f_last=f_y, clamped=state.clamped + int(clamped),
    )


@dataclass(frozen=True)
class IterationRecord:
    """Row of a run trace, written after iteration ``k - 1`` produced ``x_k``."""

    k: int
    f: float  # f(x_k)
    gap: float  # f(x_k) - f*, nan without ground truth
    grad_norm: float  # ||grad f(y_{k-1})||
    alpha: float  # alpha_{k-1}
    gamma: float  # gamma_k
    lam: float  # lambda_k
    dist_to_opt: float  # ||x_k - x*||
    wall_ns: int  # elapsed since the start of the run
    beta_mass: float = 0.0  # S used in iteration k - 1


STALL_RUN = 10
STALL_TOL = 1e-6


def run(oracle, config: SolverConfig, x0, truth=None, *,
        observer: Optional[Callable] = None, record: bool = True):
    """Iterate until the stopping rule fires or ``max_iters`` is reached.

    ``observer(prev_state, new_state, f_x)`` is called after every iteration;
    the certification tracker plugs in here.  Returns the final state and the
    list of :class:`IterationRecord` (empty when ``record`` is false).

    Raises :class:`SolverStall` when the gradient step raises the objective,
    ``f(x_{k+1}) > f(y_k) + 1e-6 (1 + |f(y_k)|)``, for ten consecutive
    iterations.  With a valid ``L`` the step never increases ``f``, while the
    momentum iterates ``x_k`` themselves may rise for a while, so ``y_k``
    (``x_k`` for the gradient method) is the reference point.
    """
    config.validate(oracle)
    x0 = np.asarray(x0, dtype=float)
    oracle.value(x0)  # validates shape and finiteness
    stop = config.stop
    if stop.kind is DIST_TO_OPT and truth is None:
        raise ConfigError("distance-based stopping needs a ground truth")

    state = initial_state(config, x0)
    records: list[IterationRecord] = []
    r0 = truth.dist(x0) if truth is not None else float("nan")
    need_f = record or config.stall_check or observer is not None
    rises = 0
    t_start = time.perf_counter_ns()

    while state.k < config.max_iters:
        prev, state = state, step(state, oracle, config)
        f_x = oracle.value(state.x) if need_f else float("nan")
        wall = time.perf_counter_ns() - t_start
        gnorm = float(np.linalg.norm(state.grad_last))
        dist = truth.dist(state.x) if truth is not None else float("nan")

        if record:
            records.append(IterationRecord(
                k=state.k, f=f_x,
                gap=f_x - truth.f_star if truth is not None else float("nan"),
                grad_norm=gnorm, alpha=state.alpha_prev, gamma=state.gamma,
                lam=state.lam if config.method is not Method.GM else float("nan"),
                dist_to_opt=dist, wall_ns=wall, beta_mass=state.beta_mass,
            ))
        if observer is not None:
            observer(prev, state, f_x)

        if config.stall_check:
            f_base = state.f_last
            rises = rises + 1 if f_x > f_base + STALL_TOL * (1.0 + abs(f_base)) else 0
            if rises >= STALL_RUN:
                raise SolverStall(
                    f"objective increased for {STALL_RUN} consecutive iterations at k={state.k}; "
                    "the Lipschitz constant is probably too small", state.k,
                    [r.f for r in records[-STALL_RUN:]])

        if stop.kind is GRAD_NORM and gnorm <= stop.threshold:
            break
        if stop.kind is DIST_TO_OPT and dist <= stop.threshold * r0:
            break

    return state, records
