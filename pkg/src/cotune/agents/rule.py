"""Rule-based agent: fixed coordinate moves, first-improvement acceptance, no context."""
from __future__ import annotations

import math

from ..core import Configuration, EvaluationRecord
from .base import Agent, ComponentEnv, RunResult, n_evaluations
from .rl import action_catalog


class RuleAgent(Agent):
    kind = "rule"
    uses_context = False

    def __init__(self, component, subspace, seed=0, levels=3):
        super().__init__(component, subspace, seed)
        self.levels = levels
        self.current = subspace.default
        self.cursor = 0

    def suggest(self, context=None, **kw) -> Configuration:
        catalog = action_catalog(self.subspace, self.current, self.levels)
        catalog = [v for _, v in catalog if v != self.current]
        if not catalog:
            return Configuration(self.component, self.current)
        values = catalog[self.cursor % len(catalog)]
        self.cursor += 1
        return Configuration(self.component, values)

    def update_policy(self, record) -> None:
        pass

    def run(self, context, sub_budget: float, env: ComponentEnv) -> RunResult:
        self.current = tuple(env.current)
        ref = env.reference
        result = RunResult(None, math.inf)
        for _ in range(n_evaluations(sub_budget, env.eval_cost)):
            config, perf, _, cost = self._evaluate(env, self.suggest(), self.random_config)
            result.records.append(EvaluationRecord(context, config, perf, cost, self.epoch))
            result.evaluations += 1
            result.cost += cost
            if perf < result.performance:
                result.config, result.performance = config, perf
            if ref is None or perf < ref:
                ref = perf
                self.current = config.values
                self.cursor = 0
        return result
