"""Reference tuning agents behind one interface."""
from .base import Agent, ComponentEnv, RunResult, n_evaluations
from .bo import BOAgent
from .rl import QTable, RLAgent, action_catalog
from .rlest import PriorityQueue, RLEstimatorAgent
from .rule import RuleAgent

AGENT_CLASSES = {
    "BO": BOAgent,
    "RL": RLAgent,
    "RLEstimator": RLEstimatorAgent,
    "rule": RuleAgent,
}

# Published agent names accepted in task files, mapped to the reference agent of the same family.
ALIASES = {
    "bo": "BO",
    "ottertune": "BO",
    "dba-bandit": "BO",
    "dba-bandits": "BO",
    "cgptuner": "BO",
    "rl": "RL",
    "cdbtune": "RL",
    "smartix": "RL",
    "qtune": "RL",
    "rlestimator": "RLEstimator",
    "rl-estimator": "RLEstimator",
    "learnedrewrite": "RLEstimator",
    "autoview": "RLEstimator",
    "rule": "rule",
    "mysqltuner": "rule",
}


def resolve_kind(name: str) -> str:
    try:
        return ALIASES[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown agent {name!r}; known: {sorted(ALIASES)}") from None


def make_agent(kind: str, component, subspace, seed: int = 0, **hyper) -> Agent:
    return AGENT_CLASSES[resolve_kind(kind)](component, subspace, seed=seed, **hyper)


__all__ = ["Agent", "ComponentEnv", "RunResult", "n_evaluations", "BOAgent", "RLAgent", "RLEstimatorAgent",
           "RuleAgent", "PriorityQueue", "QTable", "action_catalog", "AGENT_CLASSES", "ALIASES",
           "resolve_kind", "make_agent"]
