"""Named synthetic-system presets and the wiring that turns one into a runnable tuning job."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .. import allocator as alloc
from ..agents import make_agent, resolve_kind
from ..coordinator import TuneResult, make_joint_agent, tune, tune_joint
from ..core import TuningTask
from ..target_sim import SyntheticSystem, SystemParams

K_EVALS = 5


@dataclass(frozen=True)
class Scenario:
    name: str
    system: SystemParams
    agents: dict = field(default_factory=lambda: {"knob": "BO", "index": "BO", "query": "RLEstimator"})
    tuning_budget: float = 300.0
    sub_budget: float | None = None
    bootstrap_rounds: int = 3
    buffer_size: int = 7
    agent_hyper: dict = field(default_factory=dict)
    joint_hyper: dict = field(default_factory=dict)

    @property
    def effective_sub_budget(self) -> float:
        # twice the per-evaluation cost times K_EVALS evaluations per epoch
        return self.sub_budget if self.sub_budget is not None else 2 * self.system.eval_cost * K_EVALS

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


SCENARIOS = {
    # enumerable: 3 knob levels x 2 dims, 4 index bits, 2 queries x 2 rewrites
    "small-grid": Scenario(
        "small-grid",
        SystemParams(knob_dims=2, knob_lower=0.3, knob_upper=0.7, index_bits=4, queries=2, rewrites=2,
                     capacity_fraction=1.0),
        tuning_budget=120.0,
        sub_budget=6.0,
        bootstrap_rounds=2,
    ),
    # a long query workload keeps paying off after the knob and index terms saturate;
    # a sub-budget of two evaluations gives the allocator room to move budget around
    "default-3c": Scenario(
        "default-3c",
        SystemParams(queries=16, cost_low=1.0, cost_high=3.0),
        tuning_budget=250.0,
        sub_budget=4.0,
    ),
    "wide-knob": Scenario(
        "wide-knob",
        SystemParams(knob_dims=20),
        tuning_budget=250.0,
    ),
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; known: {sorted(SCENARIOS)}") from None


def build_task(scenario: Scenario, seed: int, buffer_size: int | None = None,
               rfactor: float | None = None, components: dict | None = None,
               system: SyntheticSystem | None = None) -> tuple[TuningTask, SyntheticSystem]:
    system = system or SyntheticSystem(scenario.system.with_(seed=seed))
    kinds = components or scenario.agents
    task = TuningTask(
        tuple((cid, resolve_kind(kinds[cid.name])) for cid in system.component_ids),
        tuning_budget=scenario.tuning_budget,
        sub_budget=scenario.effective_sub_budget,
        buffer_size=buffer_size or scenario.buffer_size,
        bootstrap_rounds=scenario.bootstrap_rounds,
        rfactor=rfactor,
        seed=seed,
    )
    return task, system


def build_agents(task: TuningTask, system: SyntheticSystem, hyper: dict | None = None):
    hyper = hyper or {}
    return [make_agent(kind, cid, sub, seed=task.seed, **hyper.get(cid.name, {}))
            for (cid, kind), sub in zip(task.components, system.subspaces)]


def build_allocator(strategy: str, task: TuningTask, names: list[str], **kw) -> alloc.AllocatorState:
    base, order = alloc.parse_strategy(strategy)
    idx = None
    if order is not None:
        lookup = {n: i for i, n in enumerate(names)}
        abbrev = {n[0]: i for i, n in enumerate(names)}
        try:
            idx = tuple(lookup[o] if o in lookup else abbrev[o] for o in order)
        except KeyError as exc:
            raise ValueError(f"unknown component {exc.args[0]!r} in order {order}") from None
        if sorted(idx) != list(range(len(names))):
            raise ValueError(f"sequential order must name every component once: {order}")
    buffer_size = None if base == "ts" else task.buffer_size
    return alloc.make_allocator(base, buffer_size=buffer_size, seed=task.seed, order=idx, **kw)


def run_strategy(scenario: Scenario | str, strategy: str, seed: int, buffer_size: int | None = None,
                 rfactor: float | None = None) -> tuple[TuneResult, SyntheticSystem]:
    """One seeded tuning run on a preset. ``strategy == "joint"`` runs the joint-space baseline."""
    if isinstance(scenario, str):
        scenario = get_scenario(scenario)
    task, system = build_task(scenario, seed, buffer_size, rfactor)
    if strategy == "joint":
        agent = make_joint_agent(system, seed=seed, **scenario.joint_hyper)
        return tune_joint(task, system, agent), system
    agents = build_agents(task, system, scenario.agent_hyper)
    allocator = build_allocator(strategy, task, [c.name for c in task.component_ids])
    return tune(task, system, agents, allocator), system


def sequential_orders(names=("index", "query", "knob")) -> list[str]:
    from itertools import permutations

    return ["sequential:" + "-".join(p) for p in permutations(names)]


def run_task(config, strategy: str | None = None, seed: int | None = None,
             buffer_size: int | None = None) -> tuple[TuneResult, SyntheticSystem]:
    """Run a parsed task file on the simulator; keyword arguments override the file."""
    task = config.task
    if seed is not None:
        task = replace(task, seed=seed)
    if buffer_size is not None:
        task = replace(task, buffer_size=buffer_size)
    system = SyntheticSystem(config.system.with_(seed=task.seed))
    strategy = strategy or config.strategy
    if strategy == "joint":
        agent = make_joint_agent(system, seed=task.seed)
        return tune_joint(task, system, agent), system
    agents = build_agents(task, system, config.agent_hyper)
    allocator = build_allocator(strategy, task, [c.name for c in task.component_ids], **config.allocator_options)
    return tune(task, system, agents, allocator), system
