"""Budget allocation among agents.

``ts_buffer`` is Thompson Sampling over Beta posteriors built from each agent's
most recent ``buffer_size`` rewards; ``ts`` is the same with an unbounded
buffer. ``round_robin``, ``sequential`` and a ridge-regression contextual UCB
are the comparison strategies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .core import ComponentId, RewardHistory
from .rng import make_rng

STRATEGIES = ("ts_buffer", "ts", "round_robin", "ucb", "sequential")
RFACTOR_SCALE = 20.0


@dataclass(frozen=True)
class BetaPosterior:
    S: int
    F: int

    @property
    def alpha(self) -> int:
        return self.S + 1

    @property
    def beta(self) -> int:
        return self.F + 1

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.beta(self.alpha, self.beta))


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def posterior(entries: Sequence[float], buffer_size: int | None, rfactor: float) -> BetaPosterior:
    """Beta posterior from the last ``buffer_size`` entries (all when ``None``)."""
    arr = np.asarray(entries, dtype=float)
    S, F = kernels.beta_counts(arr, 0 if buffer_size is None else int(buffer_size), float(rfactor))
    return BetaPosterior(int(S), int(F))


def calibrate_rfactor(bootstrap_rewards: Sequence[float]) -> float:
    """Largest bootstrap reward divided by 20, or 1.0 when every reward is zero."""
    r_max = max(bootstrap_rewards, default=0.0)
    return r_max / RFACTOR_SCALE if r_max > 0 else 1.0


def record_reward(history: RewardHistory, f_inc: float, f_global: float) -> float:
    """Append the clamped improvement ``max(0, f_global - f_inc)`` and return it."""
    if not (math.isfinite(f_inc) and math.isfinite(f_global)):
        raise ValueError("performance values must be finite")
    reward = max(0.0, f_global - f_inc)
    history.append(reward)
    return reward


def parse_strategy(name: str) -> tuple[str, tuple[int, ...] | tuple[str, ...] | None]:
    """``"sequential:index-query-knob"`` -> ("sequential", ("index", "query", "knob"))."""
    base, _, arg = name.partition(":")
    base = base.strip().lower().replace("-", "_")
    if base not in STRATEGIES:
        raise ValueError(f"unknown strategy {name!r}; expected one of {STRATEGIES}")
    order = None
    if base == "sequential":
        if not arg:
            raise ValueError("sequential strategy needs an order, e.g. sequential:index-query-knob")
        order = tuple(p.strip() for p in arg.replace(",", "-").split("-") if p.strip())
    return base, order


@dataclass
class AllocatorState:
    strategy: str = "ts_buffer"
    buffer_size: int | None = 7
    rfactor: float = 1.0
    rng: np.random.Generator = field(default_factory=lambda: make_rng(0, "allocator"))
    round_robin_cursor: int = 0
    order: tuple[int, ...] | None = None
    ucb_beta: float = 1.0
    ucb_lambda: float = 1.0
    ucb_data: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "ts":
            self.buffer_size = None
        elif self.buffer_size is not None and self.buffer_size < 1:
            raise ValueError("buffer_size must be >= 1")
        if not self.rfactor > 0:
            raise ValueError("rfactor must be positive")
        if self.strategy == "sequential" and not self.order:
            raise ValueError("sequential strategy requires an order")

    @property
    def uses_bootstrap(self) -> bool:
        return self.strategy in ("ts_buffer", "ts", "ucb")


def make_allocator(strategy: str, buffer_size: int | None = 7, rfactor: float = 1.0, seed: int = 0,
                   order: Sequence[int] | None = None, **kw) -> AllocatorState:
    return AllocatorState(strategy=strategy, buffer_size=buffer_size, rfactor=rfactor,
                          rng=make_rng(seed, "allocator"), order=None if order is None else tuple(order), **kw)


def posteriors(histories: Sequence[RewardHistory], state: AllocatorState) -> list[BetaPosterior]:
    return [posterior(h.entries, state.buffer_size, state.rfactor) for h in histories]


def observe(state: AllocatorState, agent: int, context: Sequence[float] | None, reward: float) -> None:
    """Feed a (context, reward) pair to the contextual UCB model; other strategies ignore it."""
    if context is None:
        return
    state.ucb_data.setdefault(agent, []).append((np.asarray(context, dtype=float), float(reward)))


def _ucb_score(pairs, x, lam, beta) -> float:
    if not pairs:
        return math.inf
    X = np.array([np.append(c, 1.0) for c, _ in pairs])
    r = np.array([rew for _, rew in pairs])
    x = np.append(x, 1.0)
    A = lam * np.eye(X.shape[1]) + X.T @ X
    theta = np.linalg.solve(A, X.T @ r)
    return float(x @ theta + beta * math.sqrt(max(x @ np.linalg.solve(A, x), 0.0)))


def select_agent(histories: Sequence[RewardHistory], state: AllocatorState,
                 contexts: Sequence[Sequence[float] | None] | None = None,
                 budget_fraction: float = 0.0) -> int:
    """Index of the agent to run next.

    ``contexts`` (current per-agent context vectors) is used by ``ucb`` only;
    ``budget_fraction`` (share of the budget consumed) by ``sequential`` only.
    """
    m = len(histories)
    if state.strategy in ("ts_buffer", "ts"):
        draws = [p.sample(state.rng) for p in posteriors(histories, state)]
        return int(np.argmax(draws))
    if state.strategy == "round_robin":
        i = state.round_robin_cursor % m
        state.round_robin_cursor += 1
        return i
    if state.strategy == "sequential":
        phase = min(int(math.floor(budget_fraction * m)), m - 1)
        return state.order[phase]
    scores = []
    for i in range(m):
        pairs = state.ucb_data.get(i, [])
        ctx = contexts[i] if contexts is not None and contexts[i] is not None else None
        if ctx is None:
            ctx = pairs[-1][0] if pairs else np.zeros(0)
        if pairs and len(ctx) != len(pairs[0][0]):
            ctx = pairs[-1][0]
        scores.append(_ucb_score(pairs, np.asarray(ctx, dtype=float), state.ucb_lambda, state.ucb_beta))
    return int(np.argmax(scores))


def decaying_arm(payout: float, pulls: int):
    """Reward schedule paying ``payout`` for the first ``pulls`` pulls, then 0 forever."""
    return lambda n: payout if n < pulls else 0.0


def constant_arm(payout: float):
    return lambda n: payout


def simulate_bandit(strategy: str, arms: Sequence, epochs: int = 60, seed: int = 0, buffer_size: int = 7,
                    bootstrap_rounds: int = 3, rfactor: float | None = None) -> tuple[float, list[int]]:
    """Drive ``select_agent`` on a synthetic bandit; returns (cumulative reward, pulled arms).

    Each arm maps its own pull count to a reward. As in the tuning loop, the
    first ``bootstrap_rounds * len(arms)`` epochs go round-robin and, unless
    ``rfactor`` is given, calibrate it from the bootstrap rewards.
    """
    m = len(arms)
    state = make_allocator(strategy, buffer_size=buffer_size, rfactor=rfactor or 1.0, seed=seed,
                           order=tuple(range(m)) if strategy == "sequential" else None)
    histories = [RewardHistory(ComponentId(i, f"arm{i}")) for i in range(m)]
    boot = bootstrap_rounds * m if state.uses_bootstrap else 0
    pulls = [0] * m
    chosen, total = [], 0.0
    for t in range(epochs):
        if t < boot:
            j = t % m
        else:
            if t == boot and boot and rfactor is None:
                state.rfactor = calibrate_rfactor([r for h in histories for r in h.entries])
            j = select_agent(histories, state, [np.zeros(1)] * m, t / epochs)
        r = float(arms[j](pulls[j]))
        pulls[j] += 1
        histories[j].append(r)
        observe(state, j, np.zeros(1), r)
        chosen.append(j)
        total += r
    return total, chosen
