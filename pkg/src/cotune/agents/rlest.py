"""RL agent trained against a GP estimator, with real evaluations rationed by uncertainty."""
from __future__ import annotations

import heapq
import itertools
import math

import numpy as np

from ..core import Configuration, ContextFeature, EvaluationRecord
from ..gp import GaussianProcess
from .base import Agent, ComponentEnv, RunResult, n_evaluations
from .rl import QTable, action_catalog, action_universe, discretize


class PriorityQueue:
    """Max-priority queue of configurations; ties pop in insertion order."""

    def __init__(self):
        self._heap: list = []
        self._seq = itertools.count()
        self._members: set = set()

    def __len__(self):
        return len(self._heap)

    def __contains__(self, values) -> bool:
        return values in self._members

    def push(self, config: Configuration, priority: float) -> None:
        heapq.heappush(self._heap, (-float(priority), next(self._seq), config))
        self._members.add(config.values)

    def pop(self) -> tuple[Configuration, float]:
        neg, _, config = heapq.heappop(self._heap)
        self._members.discard(config.values)
        return config, -neg

    def entries(self) -> list[tuple[Configuration, float]]:
        return [(c, -p) for p, _, c in sorted(self._heap)]

    def reprioritize(self, fn) -> None:
        """Recompute every priority with ``fn(list_of_configs) -> priorities``."""
        if not self._heap:
            return
        items = sorted(self._heap, key=lambda e: e[1])
        prios = fn([c for _, _, c in items])
        self._heap = [(-float(p), s, c) for (_, s, c), p in zip(items, prios)]
        heapq.heapify(self._heap)


class RLEstimatorAgent(Agent):
    """Trains a tabular policy on estimator rollouts, then spends the sub-budget
    on the recommended configuration followed by the most uncertain queued ones."""

    kind = "RLEstimator"

    def __init__(self, component, subspace, seed=0, episodes=5, episode_length=8, buckets=3,
                 epsilon=0.2, epsilon_decay=0.99, alpha=0.1, gamma=0.9, levels=3, refit_every=5):
        super().__init__(component, subspace, seed)
        self.episodes = episodes
        self.episode_length = episode_length
        self.buckets = buckets
        self.epsilon = epsilon
        self.epsilon_decay = epsilon_decay
        self.levels = levels
        self.refit_every = refit_every
        self.table = QTable(action_universe(subspace, levels), alpha, gamma)
        self.queue = PriorityQueue()
        self.estimator: GaussianProcess | None = None
        self.rows: list[EvaluationRecord] = []

    def init_model(self, context_dims: int) -> None:
        super().init_model(context_dims)
        self.estimator = GaussianProcess(context_dims + self.subspace.encoding_length,
                                         refit_every=self.refit_every)
        self.rows = []

    # -- estimator ------------------------------------------------------------

    def features(self, context: ContextFeature, batch) -> np.ndarray:
        enc = self.subspace.encode_batch(batch)
        ctx = np.broadcast_to(context.as_array(), (len(batch), len(context)))
        return np.hstack([ctx, enc])

    def estimate(self, context, batch):
        mean, var = self.estimator.predict(self.features(context, batch))
        return mean, np.sqrt(var)

    def update_estimator(self, record: EvaluationRecord) -> None:
        self._ensure_model(record.context)
        x = self.features(record.context, [record.configuration.values])[0]
        self.estimator.add(x, record.performance)
        self.rows.append(record)

    # -- policy ---------------------------------------------------------------

    def state_key(self, context: ContextFeature, values) -> tuple:
        enc = self.subspace.encode(values)
        if self.subspace.kind.value == "continuous-box":
            lo, hi = np.array(self.subspace.lower), np.array(self.subspace.upper)
            enc = (enc - lo) / (hi - lo)
        return discretize(context.values, self.buckets) + discretize(enc, self.levels)

    def _step(self, context, values, greedy=False):
        catalog = action_catalog(self.subspace, values, self.levels)
        if not catalog:
            return None
        keys = [k for k, _ in catalog]
        state = self.state_key(context, values)
        if not greedy and self.rng.random() < self.epsilon:
            i = int(self.rng.integers(len(catalog)))
        else:
            i = self.table.greedy(state, keys, self.rng)
        return catalog[i]

    def update_policy(self, state, action_key, reward, next_state) -> None:
        self.table.update(state, action_key, reward, next_state)
        self.epsilon *= self.epsilon_decay

    def train_policy(self, context: ContextFeature, start: tuple) -> None:
        """Internal episodes against the estimator; no system cost is charged."""
        for _ in range(self.episodes):
            values = start
            est, _ = self.estimate(context, [values])
            prev = float(est[0])
            for _ in range(self.episode_length):
                step = self._step(context, values)
                if step is None:
                    break
                key, nxt = step
                mean, sd = self.estimate(context, [nxt])
                scale = max(abs(prev), 1e-12)
                self.update_policy(self.state_key(context, values), key, (prev - float(mean[0])) / scale,
                                   self.state_key(context, nxt))
                if nxt not in self.queue and nxt != start:
                    self.queue.push(Configuration(self.component, nxt), float(sd[0]))
                values, prev = nxt, float(mean[0])

    def recommend(self, context: ContextFeature, start: tuple) -> Configuration:
        """Greedy rollout of the policy; returns the lowest-estimate configuration on the path."""
        values, path = start, []
        for _ in range(self.episode_length):
            step = self._step(context, values, greedy=True)
            if step is None:
                break
            values = step[1]
            path.append(values)
        if not path:
            return Configuration(self.component, start)
        mean, _ = self.estimate(context, path)
        return Configuration(self.component, path[int(np.argmin(mean))])

    def suggest(self, context: ContextFeature, current=None, **kw) -> Configuration:
        self._ensure_model(context)
        start = self.subspace.default if current is None else tuple(current)
        self.train_policy(context, start)
        return self.recommend(context, start)

    def _next_queued(self, context: ContextFeature, seen: set) -> Configuration:
        self.queue.reprioritize(lambda cfgs: self.estimate(context, [c.values for c in cfgs])[1])
        while len(self.queue):
            config, _ = self.queue.pop()
            if config.values not in seen:
                return config
        return self.random_config()

    def run(self, context: ContextFeature, sub_budget: float, env: ComponentEnv) -> RunResult:
        self._ensure_model(context)
        n_real = max(1, n_evaluations(sub_budget, env.eval_cost))
        start = tuple(env.current)
        result = RunResult(None, math.inf)
        seen: set = set()

        def record(config, perf, cost):
            rec = EvaluationRecord(context, config, perf, cost, self.epoch)
            self.update_estimator(rec)
            seen.add(config.values)
            result.records.append(rec)
            result.evaluations += 1
            result.cost += cost
            if perf < result.performance:
                result.config, result.performance = config, perf

        config = self.suggest(context, start)
        config, perf, _, cost = self._evaluate(env, config, self.random_config)
        record(config, perf, cost)
        while result.evaluations < n_real:
            config = self._next_queued(context, seen)
            config, perf, _, cost = self._evaluate(env, config, lambda: self._next_queued(context, seen))
            record(config, perf, cost)
        return result
