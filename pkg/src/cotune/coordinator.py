"""Top-level tuning loop: alternate agents, propagate context, account budget, emit a trace."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from . import allocator as alloc
from .agents.base import Agent, ComponentEnv, RunResult
from .core import (ComponentId, Configuration, ContextFeature, EvaluationRecord, JointConfiguration,
                   RewardHistory, TuningTask, dumps, loads)

log = logging.getLogger(__name__)

EMPTY_CONTEXT = ()


@dataclass
class EpochRecord:
    epoch: int
    agent: int
    agent_name: str
    phase: str
    context_cost: float
    run_cost: float
    cost: float
    evaluations: int
    f_inc: float | None
    reward: float
    f_global_before: float
    f_global: float
    applied: bool
    config: dict | None
    context_tags: list
    budget_remaining: float
    error: str | None = None

    def to_record(self) -> dict:
        return {"type": "epoch", **asdict(self)}


@dataclass
class TuningTrace:
    header: dict = field(default_factory=dict)
    epochs: list[EpochRecord] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def init_cost(self) -> float:
        return self.header.get("init_cost", 0.0)

    def total_cost(self) -> float:
        return math.fsum([self.init_cost] + [e.cost for e in self.epochs])

    def f_global_trajectory(self) -> list[float]:
        return [self.header["f_default"]] + [e.f_global for e in self.epochs]

    def lines(self) -> list[str]:
        out = [dumps({"type": "header", **self.header})]
        out += [dumps(e.to_record()) for e in self.epochs]
        if self.summary:
            out.append(dumps({"type": "summary", **self.summary}))
        return out

    def write(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text("\n".join(self.lines()) + "\n")

    @classmethod
    def read(cls, path) -> "TuningTrace":
        trace = cls()
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            rec = loads(line)
            kind = rec.pop("type")
            if kind == "header":
                trace.header = rec
            elif kind == "epoch":
                trace.epochs.append(EpochRecord(**rec))
            elif kind == "summary":
                trace.summary = rec
            else:
                raise ValueError(f"unknown trace record type {kind!r}")
        return trace


@dataclass
class CoordinatorState:
    f_global: float
    incumbent: JointConfiguration
    contexts: list[ContextFeature | None]
    budget_remaining: float
    epoch: int = 0
    trace: TuningTrace = field(default_factory=TuningTrace)
    spent: float = 0.0

    def charge(self, cost: float) -> None:
        self.spent += cost
        self.budget_remaining -= cost


@dataclass
class TuneResult:
    incumbent: JointConfiguration
    f_global: float
    trace: TuningTrace

    def __iter__(self):
        return iter((self.incumbent, self.f_global, self.trace))


def get_message(agent: int, state: CoordinatorState, system) -> tuple[ContextFeature, float, EvaluationRecord | None]:
    """Context for ``agent``: metrics with other components at the incumbent and its own at default.

    Served from cache (zero cost) unless invalidated since the last measurement.
    Returns (context, cost charged, measurement record or None when cached).
    """
    cached = state.contexts[agent]
    if cached is not None:
        return cached, 0.0, None
    default = system.default_config(agent)
    perf, metrics, cost = system.evaluate(state.incumbent.replace(default))
    context = ContextFeature(tuple(float(x) for x in metrics), state.epoch)
    state.contexts[agent] = context
    state.charge(cost)
    return context, cost, EvaluationRecord(context, default, perf, cost, state.epoch)


def update_message(changed: int, state: CoordinatorState) -> None:
    """Invalidate the cached contexts of every agent except ``changed``."""
    for i in range(len(state.contexts)):
        if i != changed:
            state.contexts[i] = None


def _feed_measurement(agent: Agent, record: EvaluationRecord) -> None:
    # the context measurement is a real observation of the default configuration
    if agent.kind == "BO":
        agent.update_policy(record)
    elif agent.kind == "RLEstimator":
        agent.update_estimator(record)


def tune(task: TuningTask, system, agents: Sequence[Agent], allocator: alloc.AllocatorState,
         feed_context_measurements: bool = True) -> TuneResult:
    """Alternate agents under the allocator until the budget runs out."""
    m = len(task.components)
    if len(agents) != m:
        raise ValueError("need exactly one agent per component")
    for (cid, _), agent in zip(task.components, agents):
        if agent.component.index != cid.index:
            raise ValueError(f"agent for {cid} is bound to {agent.component}")
    eval_cost = system.eval_cost

    default = system.default_joint()
    f_default, _, init_cost = system.evaluate(default)
    state = CoordinatorState(f_default, default, [None] * m, task.tuning_budget)
    state.charge(init_cost)
    histories = [RewardHistory(cid) for cid, _ in task.components]
    if task.rfactor is not None:
        allocator.rfactor = task.rfactor
    boot_epochs = task.bootstrap_rounds * m if allocator.uses_bootstrap else 0
    trace = state.trace
    trace.header = {
        "task": task.to_record(),
        "strategy": allocator.strategy,
        "buffer_size": allocator.buffer_size,
        "order": None if allocator.order is None else list(allocator.order),
        "components": [c.name for c, _ in task.components],
        "agent_kinds": [a.kind for a in agents],
        "eval_cost": eval_cost,
        "f_default": f_default,
        "init_cost": init_cost,
        "bootstrap_epochs": boot_epochs,
    }
    if hasattr(system, "params"):
        trace.header["system"] = system.params.to_record()

    while state.budget_remaining >= task.sub_budget:
        if state.epoch < boot_epochs:
            j, phase = state.epoch % m, "bootstrap"
        else:
            if state.epoch == boot_epochs and boot_epochs and task.rfactor is None:
                boot = [r for h in histories for r in h.entries]
                allocator.rfactor = alloc.calibrate_rfactor(boot)
                trace.header["rfactor"] = allocator.rfactor
            contexts = [c.values if c is not None else None for c in state.contexts]
            j = alloc.select_agent(histories, allocator, contexts, state.spent / task.tuning_budget)
            phase = "main"
        agent = agents[j]
        needs_context = agent.uses_context
        context_cost = eval_cost if needs_context and state.contexts[j] is None else 0.0
        if state.budget_remaining < task.sub_budget + context_cost:
            break

        agent.epoch = state.epoch
        if needs_context:
            context, context_cost, measurement = get_message(j, state, system)
            if measurement is not None and feed_context_measurements:
                _feed_measurement(agent, measurement)
        else:
            context, context_cost = ContextFeature(EMPTY_CONTEXT, state.epoch), 0.0

        cid = task.components[j][0]
        env = ComponentEnv(system, state.incumbent, cid, reference=state.f_global)
        error = None
        try:
            result = agent.run(context, task.sub_budget, env)
            if result.config is None:
                raise RuntimeError("agent returned no configuration")
            run_cost = env.cost
        except Exception as exc:  # one failing agent must not end the run
            log.warning("epoch %d: agent %s failed: %s", state.epoch, cid.name, exc)
            error = f"{type(exc).__name__}: {exc}"
            result = RunResult(None, math.inf, env.evaluations, env.cost)
            run_cost = task.sub_budget
        state.charge(run_cost)

        f_before = state.f_global
        if error is None:
            reward = alloc.record_reward(histories[j], result.performance, f_before)
        else:
            reward = 0.0
            histories[j].append(0.0)
        alloc.observe(allocator, j, context.values if needs_context else None, reward)
        applied = error is None and result.performance < f_before
        if applied:
            state.f_global = result.performance
            state.incumbent = state.incumbent.replace(result.config)
            update_message(j, state)

        trace.epochs.append(EpochRecord(
            epoch=state.epoch, agent=j, agent_name=cid.name, phase=phase,
            context_cost=context_cost, run_cost=run_cost, cost=context_cost + run_cost,
            evaluations=env.evaluations + (1 if context_cost else 0),
            f_inc=None if error else result.performance, reward=reward,
            f_global_before=f_before, f_global=state.f_global, applied=applied,
            config=None if error else result.config.to_record(),
            context_tags=[None if c is None else c.epoch_tag for c in state.contexts],
            budget_remaining=state.budget_remaining, error=error))
        state.epoch += 1

    trace.summary = {
        "f_global": state.f_global,
        "incumbent": state.incumbent.to_record(),
        "epochs": state.epoch,
        "budget_remaining": state.budget_remaining,
        "rfactor": allocator.rfactor,
    }
    return TuneResult(state.incumbent, state.f_global, trace)


class JointEnv:
    """Evaluation view over the concatenated space of all components."""

    def __init__(self, system):
        self.system = system
        self.evaluations = 0
        self.cost = 0.0
        self.reference = None

    @property
    def eval_cost(self) -> float:
        return self.system.eval_cost

    @property
    def current(self) -> tuple:
        return tuple(c.values for c in self.system.default_joint().configs)

    def joint(self, values) -> JointConfiguration:
        return JointConfiguration(tuple(Configuration(cid, tuple(v))
                                        for cid, v in zip(self.system.component_ids, values)))

    def evaluate(self, values):
        perf, metrics, cost = self.system.evaluate(self.joint(values))
        self.evaluations += 1
        self.cost += cost
        return perf, metrics, cost


JOINT_COMPONENT = ComponentId(0, "joint")


def make_joint_agent(system, seed: int = 0, **hyper):
    from .agents.bo import BOAgent
    from .core import ProductSpace

    return BOAgent(JOINT_COMPONENT, ProductSpace(system.subspaces), seed=seed, **hyper)


def tune_joint(task: TuningTask, system, agent: Agent) -> TuneResult:
    """Single BO agent over the joint space; same budget accounting as ``tune``."""
    default = system.default_joint()
    f_default, _, init_cost = system.evaluate(default)
    state = CoordinatorState(f_default, default, [None], task.tuning_budget)
    state.charge(init_cost)
    history = RewardHistory(JOINT_COMPONENT)
    trace = state.trace
    trace.header = {
        "task": task.to_record(), "strategy": "joint", "buffer_size": None, "order": None,
        "components": ["joint"], "agent_kinds": [agent.kind], "eval_cost": system.eval_cost,
        "f_default": f_default, "init_cost": init_cost, "bootstrap_epochs": 0,
        "encoding_length": agent.subspace.encoding_length,
    }
    if hasattr(system, "params"):
        trace.header["system"] = system.params.to_record()
    context = ContextFeature(EMPTY_CONTEXT, 0)
    while state.budget_remaining >= task.sub_budget:
        env = JointEnv(system)
        agent.epoch = state.epoch
        error = None
        try:
            result = agent.run(context, task.sub_budget, env)
            run_cost = env.cost
        except Exception as exc:
            log.warning("epoch %d: joint agent failed: %s", state.epoch, exc)
            error = f"{type(exc).__name__}: {exc}"
            result, run_cost = RunResult(None, math.inf), task.sub_budget
        state.charge(run_cost)
        f_before = state.f_global
        reward = alloc.record_reward(history, result.performance, f_before) if error is None else 0.0
        applied = error is None and result.performance < f_before
        config_rec = None
        if error is None:
            joint = env.joint(result.config.values)
            config_rec = joint.to_record()
            if applied:
                state.f_global, state.incumbent = result.performance, joint
        trace.epochs.append(EpochRecord(
            epoch=state.epoch, agent=0, agent_name="joint", phase="main", context_cost=0.0,
            run_cost=run_cost, cost=run_cost, evaluations=env.evaluations,
            f_inc=None if error else result.performance, reward=reward, f_global_before=f_before,
            f_global=state.f_global, applied=applied, config=config_rec, context_tags=[],
            budget_remaining=state.budget_remaining, error=error))
        state.epoch += 1
    trace.summary = {"f_global": state.f_global, "incumbent": state.incumbent.to_record(),
                     "epochs": state.epoch, "budget_remaining": state.budget_remaining, "rfactor": None}
    return TuneResult(state.incumbent, state.f_global, trace)
