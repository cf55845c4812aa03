"""Agent interface shared by every tuning-agent family."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..core import (ComponentId, Configuration, ContextFeature, EvaluationRecord, InvalidConfiguration,
                    JointConfiguration, Subspace)
from ..rng import make_rng

log = logging.getLogger(__name__)

MAX_RETRIES = 10


class ComponentEnv:
    """Evaluation view for one component: every other component stays at the incumbent.

    ``reference`` is the incumbent performance when the view was created.
    """

    def __init__(self, system, incumbent: JointConfiguration, component: ComponentId,
                 reference: float | None = None):
        self.system = system
        self.incumbent = incumbent
        self.component = component
        self.reference = reference
        self.evaluations = 0
        self.cost = 0.0

    @property
    def eval_cost(self) -> float:
        return self.system.eval_cost

    @property
    def current(self) -> tuple:
        return self.incumbent[self.component.index].values

    def evaluate(self, values) -> tuple[float, np.ndarray, float]:
        joint = self.incumbent.replace(Configuration(self.component, tuple(values)))
        perf, metrics, cost = self.system.evaluate(joint)
        self.evaluations += 1
        self.cost += cost
        return perf, metrics, cost


@dataclass
class RunResult:
    config: Configuration | None
    performance: float
    evaluations: int = 0
    cost: float = 0.0
    records: list[EvaluationRecord] = field(default_factory=list)

    def __iter__(self):
        yield self.config
        yield self.performance


def n_evaluations(sub_budget: float, eval_cost: float) -> int:
    return int(math.floor(sub_budget / eval_cost + 1e-9))


class Agent:
    """Base class: InitModel / Suggest / UpdatePolicy plus the run loop.

    Subclasses implement ``suggest`` and ``update_policy``; ``run`` drives
    suggest -> evaluate -> update until the sub-budget is exhausted.
    """

    kind = "base"
    uses_context = True

    def __init__(self, component: ComponentId, subspace: Subspace, seed: int = 0):
        self.component = component
        self.subspace = subspace
        self.rng = make_rng(seed, "agent", component.index)
        self.context_dims: int | None = None
        self.epoch = 0

    def init_model(self, context_dims: int) -> None:
        self.context_dims = context_dims

    def _ensure_model(self, context: ContextFeature) -> None:
        if self.context_dims is None:
            self.init_model(len(context))
        elif len(context) != self.context_dims:
            raise ValueError(f"context length changed from {self.context_dims} to {len(context)}")

    def random_config(self) -> Configuration:
        return Configuration(self.component, self.subspace.sample(self.rng, 1)[0])

    def suggest(self, context: ContextFeature, **kw) -> Configuration:
        raise NotImplementedError

    def update_policy(self, record) -> None:
        raise NotImplementedError

    def _evaluate(self, env: ComponentEnv, config: Configuration, retry):
        """Evaluate, re-suggesting on rejection (no cost), then random fallback."""
        for _ in range(MAX_RETRIES):
            try:
                perf, metrics, cost = env.evaluate(config.values)
                return config, perf, metrics, cost
            except InvalidConfiguration as exc:
                log.debug("agent %s: rejected suggestion (%s)", self.component.name, exc)
                config = retry()
        while True:
            config = self.random_config()
            try:
                perf, metrics, cost = env.evaluate(config.values)
                return config, perf, metrics, cost
            except InvalidConfiguration:
                continue

    def run(self, context: ContextFeature, sub_budget: float, env: ComponentEnv) -> RunResult:
        self._ensure_model(context)
        result = RunResult(None, math.inf)
        for _ in range(n_evaluations(sub_budget, env.eval_cost)):
            config = self.suggest(context)
            config, perf, metrics, cost = self._evaluate(env, config, lambda: self.suggest(context))
            record = EvaluationRecord(context, config, perf, cost, self.epoch)
            self.update_policy(record)
            result.records.append(record)
            result.evaluations += 1
            result.cost += cost
            if perf < result.performance:
                result.config, result.performance = config, perf
        return result
