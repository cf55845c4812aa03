"""Tabular Q-learning agent over single-move actions around the current best configuration."""
from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

from ..core import Configuration, ContextFeature, EvaluationRecord, SubspaceKind, TransitionRecord
from .base import Agent, ComponentEnv, RunResult, n_evaluations


def action_catalog(subspace, current: tuple, levels: int = 3) -> list[tuple[tuple, tuple]]:
    """(action key, resulting values) pairs reachable by one move from ``current``.

    Continuous: set one dimension to one of ``levels`` grid values. Binary:
    flip one bit, keeping the capacity constraint. Categorical: change one
    position to another choice.
    """
    out = []
    if subspace.kind is SubspaceKind.CONTINUOUS:
        for d, grid in enumerate(subspace.grid(levels)):
            for li, v in enumerate(grid):
                vals = list(current)
                vals[d] = v
                out.append((("set", d, li), tuple(vals)))
    elif subspace.kind is SubspaceKind.BINARY:
        for d in range(subspace.dims):
            vals = list(current)
            vals[d] = not vals[d]
            if subspace.contains(vals):
                out.append((("flip", d), tuple(vals)))
    else:
        for d, card in enumerate(subspace.cardinalities):
            for c in range(card):
                if c != current[d]:
                    vals = list(current)
                    vals[d] = c
                    out.append((("set", d, c), tuple(vals)))
    return out


def action_universe(subspace, levels: int = 3) -> list[tuple]:
    if subspace.kind is SubspaceKind.CONTINUOUS:
        return [("set", d, li) for d in range(subspace.dims) for li in range(levels)]
    if subspace.kind is SubspaceKind.BINARY:
        return [("flip", d) for d in range(subspace.dims)]
    return [("set", d, c) for d, card in enumerate(subspace.cardinalities) for c in range(card)]


class QTable:
    """Q(s, a) with zero default and the one-step Q-learning update."""

    def __init__(self, actions, alpha=0.1, gamma=0.9):
        self.actions = list(actions)
        self.alpha = alpha
        self.gamma = gamma
        self.q: dict = defaultdict(dict)

    def get(self, state, action) -> float:
        return self.q[state].get(action, 0.0)

    def set(self, state, action, value) -> None:
        self.q[state][action] = value

    def max_value(self, state) -> float:
        row = self.q.get(state, {})
        if len(row) < len(self.actions):
            return max([0.0, *row.values()])
        return max(row.values())

    def update(self, state, action, reward, next_state) -> float:
        old = self.get(state, action)
        new = old + self.alpha * (reward + self.gamma * self.max_value(next_state) - old)
        self.set(state, action, new)
        return new

    def greedy(self, state, keys, rng) -> int:
        """Index of the highest-valued key; ties broken uniformly at random."""
        vals = np.array([self.get(state, k) for k in keys])
        best = np.flatnonzero(vals == vals.max())
        return int(best[0] if len(best) == 1 else rng.choice(best))


def discretize(vec, buckets: int) -> tuple:
    return tuple(min(max(int(math.floor(v * buckets)), 0), buckets - 1) for v in vec)


class RLAgent(Agent):
    """State = internal metrics ++ context, each bucketed into ``buckets`` levels."""

    kind = "RL"

    def __init__(self, component, subspace, seed=0, buckets=3, epsilon=0.2, epsilon_decay=0.99,
                 alpha=0.1, gamma=0.9, levels=3):
        super().__init__(component, subspace, seed)
        self.buckets = buckets
        self.epsilon = epsilon
        self.epsilon_decay = epsilon_decay
        self.levels = levels
        self.table = QTable(action_universe(subspace, levels), alpha, gamma)
        self.current: tuple = subspace.default
        self._last_keys: dict[tuple, tuple] = {}

    def state_key(self, state_vec) -> tuple:
        return discretize(state_vec, self.buckets)

    def catalog(self):
        return action_catalog(self.subspace, self.current, self.levels)

    def suggest(self, context: ContextFeature, state_metrics=None, **kw) -> Configuration:
        self._ensure_model(context)
        if state_metrics is None:
            state_metrics = context.values
        state = self.state_key(tuple(state_metrics) + context.values)
        catalog = self.catalog()
        if not catalog:
            return Configuration(self.component, self.current)
        keys = [k for k, _ in catalog]
        if self.rng.random() < self.epsilon:
            i = int(self.rng.integers(len(catalog)))
        else:
            i = self.table.greedy(state, keys, self.rng)
        key, values = catalog[i]
        self._last_keys[values] = key
        return Configuration(self.component, values)

    def update_policy(self, transition: TransitionRecord, action_key=None) -> None:
        if action_key is None:
            action_key = self._last_keys.get(transition.action.values)
        if action_key is None:
            raise KeyError("transition action was not produced by this agent")
        self.table.update(self.state_key(transition.state), action_key, transition.reward,
                          self.state_key(transition.next_state))
        self.epsilon *= self.epsilon_decay

    def run(self, context: ContextFeature, sub_budget: float, env: ComponentEnv) -> RunResult:
        self._ensure_model(context)
        self.current = tuple(env.current)
        ref = env.reference
        metrics = context.values
        result = RunResult(None, math.inf)
        for _ in range(n_evaluations(sub_budget, env.eval_cost)):
            proposed = self.suggest(context, metrics)
            key = self._last_keys[proposed.values]
            config, perf, new_metrics, cost = self._evaluate(env, proposed, self.random_config)
            if ref is None:
                ref = perf
            reward = (ref - perf) / max(abs(ref), 1e-12)
            state = tuple(metrics) + context.values
            next_state = tuple(map(float, new_metrics)) + context.values
            if config == proposed:
                self.update_policy(TransitionRecord(state, config, next_state, reward), key)
            metrics = next_state[: len(new_metrics)]
            result.records.append(EvaluationRecord(context, config, perf, cost, self.epoch))
            result.evaluations += 1
            result.cost += cost
            if perf < result.performance:
                result.config, result.performance = config, perf
            if perf < ref:
                ref = perf
                self.current = config.values
        return result
