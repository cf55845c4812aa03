import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotune import allocator as alloc
from cotune.agents import make_agent
from cotune.agents.base import Agent, RunResult
from cotune.coordinator import (CoordinatorState, TuningTrace, get_message, make_joint_agent, tune, tune_joint,
                                update_message)
from cotune.core import ComponentId, Configuration, TuningTask
from cotune.harness.experiment import allocation_pattern
from cotune.target_sim import SyntheticSystem


class InstrumentedSystem:
    """Delegates to a synthetic system and checks every evaluation it receives.

    While an agent runs, ``active`` holds (component index, incumbent at epoch
    start); any evaluation changing another component is recorded as a leak.
    """

    def __init__(self, system):
        self.system = system
        self.log = []
        self.in_flight = 0
        self.max_in_flight = 0
        self.active = None
        self.leaks = []

    def __getattr__(self, name):
        return getattr(self.system, name)

    def evaluate(self, joint):
        self.in_flight += 1
        self.max_in_flight = max(self.max_in_flight, self.in_flight)
        try:
            if self.active is not None:
                j, inc = self.active
                for c in joint.configs:
                    if c.component.index != j and c != inc[c.component.index]:
                        self.leaks.append((j, c))
            self.log.append(joint)
            return self.system.evaluate(joint)
        finally:
            self.in_flight -= 1


def watch(agent, system):
    """Mark the system active for the agent's component during ``run``."""
    orig = agent.run

    def run(context, sub_budget, env):
        system.active = (agent.component.index, env.incumbent)
        try:
            return orig(context, sub_budget, env)
        finally:
            system.active = None

    agent.run = run
    return agent


def setup(seed=0, kinds=("BO", "BO", "RLEstimator"), budget=80.0, sub_budget=6.0, strategy="ts_buffer",
          eval_cost=1.0, bootstrap_rounds=1, **sys_kw):
    system = InstrumentedSystem(SyntheticSystem(seed=seed, eval_cost=eval_cost, metric_dims=4, **sys_kw))
    comps = tuple((cid, k) for cid, k in zip(system.component_ids, kinds))
    task = TuningTask(comps, tuning_budget=budget, sub_budget=sub_budget, bootstrap_rounds=bootstrap_rounds,
                      seed=seed)
    hyper = {"BO": {"n_candidates": 200}}
    agents = [watch(make_agent(k, cid, sub, seed=seed, **hyper.get(k, {})), system)
              for (cid, k), sub in zip(comps, system.subspaces)]
    order = (1, 2, 0) if strategy == "sequential" else None
    allocator = alloc.make_allocator(strategy, seed=seed, order=order)
    return system, task, agents, allocator


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from(["ts_buffer", "ts", "round_robin", "ucb", "sequential"]),
       st.sampled_from([0.5, 1.0, 1.25]), st.sampled_from([("BO", "BO", "RLEstimator"), ("RL", "rule", "BO")]))
def test_coordinator_invariants(seed, strategy, eval_cost, kinds):
    system, task, agents, allocator = setup(seed, kinds, budget=60.0 * eval_cost, sub_budget=4 * eval_cost,
                                            strategy=strategy, eval_cost=eval_cost)
    inc, f, trace = tune(task, system, agents, allocator)
    # budget conservation, exact for dyadic costs
    assert task.tuning_budget == trace.epochs[-1].budget_remaining + trace.init_cost + sum(e.cost for e in trace.epochs)
    assert trace.total_cost() <= task.tuning_budget
    # monotone incumbent
    traj = trace.f_global_trajectory()
    assert all(b <= a for a, b in zip(traj, traj[1:]))
    # re-evaluation of the incumbent reproduces f_global
    assert system.system.objective(inc) == f
    # serialized evaluations and isolation
    assert system.max_in_flight == 1
    assert system.leaks == []
    # reward bookkeeping
    for e in trace.epochs:
        if e.error is None:
            assert e.reward == max(0.0, e.f_global_before - e.f_inc)
        assert e.applied == (e.error is None and e.f_inc < e.f_global_before)
    # every evaluation is accounted for: one initial, plus per-epoch counts
    assert len(system.log) == 1 + sum(e.evaluations for e in trace.epochs)


def test_context_measurement_uses_incumbent_and_own_default():
    system, task, agents, allocator = setup(1, budget=70.0)
    _, _, trace = tune(task, system, agents, allocator)
    # replay the trace: every context measurement keeps others at the incumbent, own component at default
    inc = system.system.default_joint()
    log = iter(system.log[1:])
    for e in trace.epochs:
        n = e.evaluations
        if e.context_cost:
            measured = next(log)
            n -= 1
            j = e.agent
            assert measured[j] == system.system.default_config(j)
            assert all(measured[i] == inc[i] for i in range(3) if i != j)
        for _ in range(n):
            next(log)
        if e.applied:
            inc = inc.replace(Configuration.from_record(e.config, system.system.subspaces[e.agent]))
    assert next(log, None) is None


def test_bootstrap_is_round_robin():
    system, task, agents, allocator = setup(2, budget=120.0, bootstrap_rounds=3)
    _, _, trace = tune(task, system, agents, allocator)
    assert [e.agent for e in trace.epochs[:9]] == [0, 1, 2, 0, 1, 2, 0, 1, 2]
    assert all(e.phase == "bootstrap" for e in trace.epochs[:9])
    assert trace.epochs[9].phase == "main"
    assert "rfactor" in trace.header


class ConstantAgent(Agent):
    """Always reports one fixed configuration; optional performance override or failure."""

    kind = "rule"
    uses_context = False

    def __init__(self, component, subspace, seed=0, values=None, perf=None, fail=False):
        super().__init__(component, subspace, seed)
        self.values = subspace.default if values is None else values
        self.perf = perf
        self.fail = fail

    def run(self, context, sub_budget, env):
        if self.fail:
            env.evaluate(self.values)
            raise RuntimeError("boom")
        perf, _, cost = env.evaluate(self.values)
        if self.perf is not None:
            perf = self.perf
        return RunResult(Configuration(self.component, self.values), perf, 1, cost)


def constant_setup(budget, sub_budget, **kw):
    system = SyntheticSystem(seed=0, metric_dims=4)
    comps = tuple((cid, "rule") for cid in system.component_ids)
    task = TuningTask(comps, tuning_budget=budget, sub_budget=sub_budget, bootstrap_rounds=1)
    agents = [ConstantAgent(cid, sub, **kw) for cid, sub in zip(system.component_ids, system.subspaces)]
    return system, task, agents


def test_termination_boundary_with_run_cost_equal_to_sub_budget():
    class FullAgent(ConstantAgent):
        def run(self, context, sub_budget, env):
            for _ in range(int(sub_budget)):
                perf, _, cost = env.evaluate(self.values)
            return RunResult(Configuration(self.component, self.values), perf, int(sub_budget), env.cost)

    system = SyntheticSystem(seed=0, metric_dims=4)
    comps = tuple((cid, "rule") for cid in system.component_ids)
    task = TuningTask(comps, tuning_budget=1.0 + 3 * 5.0, sub_budget=5.0, bootstrap_rounds=1)
    agents = [FullAgent(cid, sub) for cid, sub in zip(system.component_ids, system.subspaces)]
    _, _, trace = tune(task, system, agents, alloc.make_allocator("round_robin"))
    assert len(trace.epochs) == 3
    assert trace.epochs[-1].budget_remaining == 0.0
    task2 = TuningTask(comps, tuning_budget=1.0 + 3 * 5.0 - 0.5, sub_budget=5.0, bootstrap_rounds=1)
    _, _, trace2 = tune(task2, system, agents, alloc.make_allocator("round_robin"))
    assert len(trace2.epochs) == 2


def test_no_improvement_keeps_default():
    system, task, agents = constant_setup(budget=30.0, sub_budget=3.0)
    inc, f, trace = tune(task, system, agents, alloc.make_allocator("ts_buffer"))
    assert inc == system.default_joint()
    assert all(e.f_global == trace.header["f_default"] for e in trace.epochs)
    assert all(e.reward == 0.0 and not e.applied for e in trace.epochs)


def test_equal_performance_is_not_applied():
    system = SyntheticSystem(seed=0, metric_dims=4)
    f0 = system.objective(system.default_joint())
    comps = tuple((cid, "rule") for cid in system.component_ids)
    task = TuningTask(comps, tuning_budget=10.0, sub_budget=3.0, bootstrap_rounds=1)
    knob = system.subspaces[0]
    agents = [ConstantAgent(system.component_ids[0], knob, values=tuple(0.9 for _ in knob.default), perf=f0)]
    agents += [ConstantAgent(c, s) for c, s in zip(system.component_ids[1:], system.subspaces[1:])]
    inc, f, trace = tune(task, system, agents, alloc.make_allocator("round_robin"))
    assert not trace.epochs[0].applied and inc == system.default_joint() and f == f0


def test_failing_agent_gets_zero_reward_and_is_charged():
    system, task, agents = constant_setup(budget=30.0, sub_budget=3.0, fail=True)
    _, _, trace = tune(task, system, agents, alloc.make_allocator("round_robin"))
    assert trace.epochs and all(e.error and e.reward == 0.0 for e in trace.epochs)
    assert all(e.run_cost == 3.0 for e in trace.epochs)
    assert task.tuning_budget == trace.epochs[-1].budget_remaining + trace.total_cost()


def test_get_message_cache_and_invalidation():
    system = SyntheticSystem(seed=0, metric_dims=5)
    state = CoordinatorState(0.0, system.default_joint(), [None] * 3, 100.0)
    ctx, cost, rec = get_message(1, state, system)
    assert cost == system.eval_cost and rec is not None and len(ctx) == 5
    ctx2, cost2, rec2 = get_message(1, state, system)
    assert ctx2 == ctx and cost2 == 0.0 and rec2 is None
    get_message(0, state, system)
    get_message(2, state, system)
    update_message(1, state)
    assert state.contexts[1] is not None and state.contexts[0] is None and state.contexts[2] is None
    update_message(1, state)
    assert state.contexts[1] is not None
    _, cost3, _ = get_message(0, state, system)
    assert cost3 == system.eval_cost
    assert state.budget_remaining == 100.0 - 3 * system.eval_cost - system.eval_cost


def test_trace_round_trip_and_self_description(tmp_path):
    system, task, agents, allocator = setup(3, budget=60.0, strategy="round_robin")
    _, f, trace = tune(task, system, agents, allocator)
    path = tmp_path / "t.jsonl"
    trace.write(path)
    back = TuningTrace.read(path)
    assert back.f_global_trajectory() == trace.f_global_trajectory()
    assert back.f_global_trajectory()[-1] == f
    assert allocation_pattern(back).shares == allocation_pattern(trace).shares
    assert back.total_cost() == trace.total_cost()
    assert back.header["strategy"] == "round_robin"


def test_joint_baseline_accounting():
    system = InstrumentedSystem(SyntheticSystem(seed=4, metric_dims=4))
    comps = tuple((cid, "BO") for cid in system.component_ids)
    task = TuningTask(comps, tuning_budget=41.0, sub_budget=10.0)
    agent = make_joint_agent(system.system, seed=4, n_candidates=100)
    assert agent.subspace.encoding_length == sum(s.encoding_length for s in system.subspaces)
    inc, f, trace = tune_joint(task, system, agent)
    assert len(trace.epochs) == 4
    assert task.tuning_budget == trace.epochs[-1].budget_remaining + trace.total_cost()
    assert system.system.objective(inc) == f
    traj = trace.f_global_trajectory()
    assert all(b <= a for a, b in zip(traj, traj[1:]))


def test_rejects_mismatched_agents():
    system, task, agents, allocator = setup(0)
    with pytest.raises(ValueError):
        tune(task, system, agents[:2], allocator)
    with pytest.raises(ValueError):
        tune(task, system, [agents[1], agents[0], agents[2]], allocator)


def test_same_seed_same_trace():
    lines = []
    for _ in range(2):
        system, task, agents, allocator = setup(5, budget=50.0)
        lines.append(tune(task, system, agents, allocator).trace.lines())
    assert lines[0] == lines[1]
