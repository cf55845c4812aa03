import math
from collections import Counter

import numpy as np
import pytest

from cotune.agents import (ALIASES, BOAgent, ComponentEnv, PriorityQueue, QTable, RLAgent, RLEstimatorAgent,
                           RuleAgent, action_catalog, make_agent, resolve_kind)
from cotune.core import (ComponentId, Configuration, ContextFeature, EvaluationRecord, InvalidConfiguration,
                         Subspace, TransitionRecord)
from cotune.target_sim import SyntheticSystem

CTX = ContextFeature((0.2, 0.7, 0.4))


class RecordingSystem:
    """Wraps a system, remembering every joint configuration it evaluates."""

    def __init__(self, system, reject_first=0):
        self.system = system
        self.seen = []
        self.reject_left = reject_first
        self.rejected = 0

    @property
    def eval_cost(self):
        return self.system.eval_cost

    def evaluate(self, joint):
        if self.reject_left > 0:
            self.reject_left -= 1
            self.rejected += 1
            raise InvalidConfiguration("rejected by test system")
        self.seen.append(joint)
        return self.system.evaluate(joint)


def env_for(name, seed=0, reject_first=0, **overrides):
    system = SyntheticSystem(seed=seed, metric_dims=3, **overrides)
    rec = RecordingSystem(system, reject_first)
    cid = system.component(name)
    env = ComponentEnv(rec, system.default_joint(), cid, reference=system.objective(system.default_joint()))
    return system, rec, env, cid


def agent_for(kind, system, cid, **hyper):
    return make_agent(kind, cid, system.subspaces[cid.index], seed=1, **hyper)


# -- shared contract --------------------------------------------------------

@pytest.mark.parametrize("kind", ["BO", "RL", "RLEstimator", "rule"])
@pytest.mark.parametrize("name", ["knob", "index", "query"])
def test_run_budget_and_isolation(kind, name):
    system, rec, env, cid = env_for(name)
    agent = agent_for(kind, system, cid)
    res = agent.run(CTX, 7.0, env)
    assert res.evaluations == env.evaluations == 7
    assert res.cost == env.cost == 7.0
    assert res.performance == min(r.performance for r in res.records)
    inc = system.default_joint()
    for joint in rec.seen:
        for c in joint.configs:
            if c.component != cid:
                assert c == inc[c.component.index]
        assert system.subspaces[cid.index].contains(joint[cid.index].values)


@pytest.mark.parametrize("kind", ["BO", "RL", "RLEstimator"])
def test_suggestions_always_valid(kind):
    system = SyntheticSystem(seed=3, metric_dims=3)
    rng = np.random.default_rng(0)
    hyper = {"BO": {"n_candidates": 16}, "RLEstimator": {"episodes": 1, "episode_length": 2}}.get(kind, {})
    for cid, sub in zip(system.component_ids, system.subspaces):
        agent = make_agent(kind, cid, sub, seed=2, **hyper)
        agent.init_model(3)
        for _ in range(5):
            x = sub.sample(rng, 1)[0]
            rec = EvaluationRecord(CTX, Configuration(cid, x), float(rng.random()), 1.0)
            agent.update_estimator(rec) if kind == "RLEstimator" else (
                agent.update_policy(rec) if kind == "BO" else None)
        n = 10 ** 4 // 3 + 1
        for _ in range(n):
            cfg = agent.suggest(CTX)
            assert sub.contains(cfg.values)


def test_rejected_suggestions_retry_without_cost():
    system, rec, env, cid = env_for("index", reject_first=4)
    agent = agent_for("BO", system, cid)
    res = agent.run(CTX, 3.0, env)
    assert rec.rejected == 4
    assert res.evaluations == 3 and res.cost == 3.0


def test_retries_exhausted_fall_back_to_random():
    system, rec, env, cid = env_for("knob", reject_first=12)
    agent = agent_for("BO", system, cid)
    res = agent.run(CTX, 1.0, env)
    assert rec.rejected == 12
    assert res.evaluations == 1


def test_aliases_resolve_to_families():
    assert resolve_kind("OtterTune") == "BO"
    assert resolve_kind("DBA-Bandit") == "BO"
    assert resolve_kind("LearnedRewrite") == "RLEstimator"
    assert resolve_kind("CDBTune") == "RL"
    assert resolve_kind("MySQLTuner") == "rule"
    assert set(ALIASES.values()) == {"BO", "RL", "RLEstimator", "rule"}
    with pytest.raises(ValueError):
        resolve_kind("Nope")


# -- BO ---------------------------------------------------------------------

def test_bo_cold_start_random_and_update_appends():
    sub = Subspace.box([0.0], [1.0])
    cid = ComponentId(0, "knob")
    agent = BOAgent(cid, sub, seed=0)
    cfg = agent.suggest(ContextFeature((0.0,)))
    assert sub.contains(cfg.values) and agent.gp.n == 0
    rec = EvaluationRecord(ContextFeature((0.0,)), cfg, 1.0, 1.0)
    agent.update_policy(rec)
    assert agent.gp.n == 1 and agent.rows[-1] == rec
    with pytest.raises(ValueError):
        agent.update_policy(EvaluationRecord(ContextFeature((0.0,)), Configuration(ComponentId(1, "x"), (0.1,)),
                                             1.0, 1.0))


def train_two_contexts(agent, cid):
    xs = np.linspace(0, 1, 9)
    for c, opt in ((0.0, 0.2), (1.0, 0.8)):
        for x in xs:
            agent.update_policy(EvaluationRecord(ContextFeature((c,)), Configuration(cid, (float(x),)),
                                                 float((x - opt) ** 2), 1.0))


def test_bo_posterior_ranks_candidates_by_context():
    cid = ComponentId(0, "knob")
    agent = BOAgent(cid, Subspace.box([0.0], [1.0]), seed=0)
    train_two_contexts(agent, cid)
    probes = [(0.2,), (0.8,)]
    m1, _ = agent.gp.predict(agent.features(ContextFeature((0.0,)), probes))
    m2, _ = agent.gp.predict(agent.features(ContextFeature((1.0,)), probes))
    assert m1[0] < m1[1]
    assert m2[1] < m2[0]


# -- RL ---------------------------------------------------------------------

def test_catalog_excludes_capacity_violations():
    sub = Subspace.binary(3, weights=(1.0, 1.0, 5.0), capacity=2.0)
    keys = [k for k, _ in action_catalog(sub, (True, False, False))]
    assert ("flip", 2) not in keys
    assert ("flip", 0) in keys and ("flip", 1) in keys


def test_catalog_shapes():
    box = Subspace.box([0.0, 0.0], [1.0, 1.0])
    assert len(action_catalog(box, (0.5, 0.5))) == 6
    cat = Subspace.categorical([3, 2])
    assert {v for _, v in action_catalog(cat, (0, 0))} == {(1, 0), (2, 0), (0, 1)}


def test_q_update_arithmetic():
    t = QTable(["a", "b"], alpha=0.1, gamma=0.0)
    assert t.update("s", "a", 1.0, "s2") == pytest.approx(0.1)
    for _ in range(200):
        t.update("s", "a", 1.0, "s2")
    assert t.get("s", "a") == pytest.approx(1.0, abs=1e-8)
    z = QTable(["a"], alpha=0.1, gamma=0.9)
    for _ in range(10):
        z.update("s", "a", 0.0, "s")
    assert z.get("s", "a") == 0.0


def test_q_update_bootstraps_from_next_state():
    t = QTable(["a", "b"], alpha=0.5, gamma=0.9)
    t.set("s2", "b", 2.0)
    assert t.update("s", "a", 1.0, "s2") == pytest.approx(0.5 * (1.0 + 0.9 * 2.0))


def test_rl_epsilon_one_is_uniform_over_catalog():
    sub = Subspace.categorical([3, 3])
    agent = RLAgent(ComponentId(0, "query"), sub, seed=0, epsilon=1.0, epsilon_decay=1.0)
    counts = Counter(agent.suggest(ContextFeature((0.5,))).values for _ in range(8000))
    assert len(counts) == 4
    assert max(counts.values()) - min(counts.values()) < 0.1 * 2000


def test_rl_greedy_picks_positive_q():
    sub = Subspace.categorical([3, 3])
    agent = RLAgent(ComponentId(0, "query"), sub, seed=0, epsilon=0.0)
    ctx = ContextFeature((0.5,))
    state = agent.state_key(ctx.values + ctx.values)
    agent.table.set(state, ("set", 1, 2), 0.7)
    for _ in range(20):
        assert agent.suggest(ctx).values == (0, 2)


def test_rl_update_uses_transition_and_decays_epsilon():
    sub = Subspace.categorical([3])
    agent = RLAgent(ComponentId(0, "query"), sub, seed=0, epsilon=0.5, gamma=0.0)
    ctx = ContextFeature((0.1,))
    cfg = agent.suggest(ctx)
    agent.update_policy(TransitionRecord((0.1, 0.1), cfg, (0.9, 0.1), 1.0))
    key = agent._last_keys[cfg.values]
    assert agent.table.get(agent.state_key((0.1, 0.1)), key) == pytest.approx(0.1)
    assert agent.epsilon == pytest.approx(0.5 * 0.99)


# -- RL with estimator ------------------------------------------------------

def test_priority_queue_order_and_ties():
    q = PriorityQueue()
    cid = ComponentId(0, "q")
    for i, p in enumerate((0.9, 0.1, 0.5, 0.5)):
        q.push(Configuration(cid, (i,)), p)
    assert [q.pop()[1] for _ in range(4)] == [0.9, 0.5, 0.5, 0.1]
    for i, p in enumerate((0.5, 0.5)):
        q.push(Configuration(cid, (i,)), p)
    assert [q.pop()[0].values for _ in range(2)] == [(0,), (1,)]


def test_priority_queue_reprioritize():
    q = PriorityQueue()
    cid = ComponentId(0, "q")
    for i in range(3):
        q.push(Configuration(cid, (i,)), i)
    q.reprioritize(lambda cfgs: [-c.values[0] for c in cfgs])
    assert q.pop()[0].values == (0,)
    assert (1,) in q and (0,) not in q


@pytest.mark.parametrize("sub_budget,expected", [(2.0, 2), (5.0, 5), (1.0, 1)])
def test_rlest_real_evaluations_match_budget(sub_budget, expected):
    system, rec, env, cid = env_for("query")
    agent = agent_for("RLEstimator", system, cid)
    before = system.n_evaluations
    res = agent.run(CTX, sub_budget, env)
    assert res.evaluations == expected
    assert system.n_evaluations - before == expected
    assert env.cost == expected * system.eval_cost
    assert agent.estimator.n == expected


def test_rlest_internal_episodes_cost_nothing():
    system, rec, env, cid = env_for("index")
    agent = agent_for("RLEstimator", system, cid)
    agent._ensure_model(CTX)
    before = system.n_evaluations
    agent.train_policy(CTX, system.subspaces[cid.index].default)
    assert system.n_evaluations == before
    assert len(agent.queue) > 0


def test_rlest_evaluates_queue_in_uncertainty_order():
    sub = Subspace.categorical([4])
    cid = ComponentId(0, "query")
    agent = RLEstimatorAgent(cid, sub, seed=0)
    agent._ensure_model(ContextFeature((0.0,)))
    stds = {(1,): 0.9, (2,): 0.1, (3,): 0.5}
    agent.estimate = lambda ctx, batch: (np.zeros(len(batch)), np.array([stds.get(tuple(b), 0.0) for b in batch]))
    for v in ((2,), (1,), (3,)):
        agent.queue.push(Configuration(cid, v), 0.0)
    order = [agent._next_queued(ContextFeature((0.0,)), set()).values for _ in range(3)]
    assert order == [(1,), (3,), (2,)]


def test_rule_agent_ignores_context_and_moves_one_step():
    system, rec, env, cid = env_for("query")
    agent = RuleAgent(cid, system.subspaces[cid.index])
    assert not agent.uses_context
    res = agent.run(None, 4.0, env)
    assert res.evaluations == 4
    for joint in rec.seen:
        diff = sum(a != b for a, b in zip(joint[cid.index].values, system.subspaces[cid.index].default))
        assert diff <= 2


def test_context_length_change_rejected():
    system, rec, env, cid = env_for("knob")
    agent = agent_for("BO", system, cid)
    agent.run(CTX, 1.0, env)
    with pytest.raises(ValueError):
        agent.run(ContextFeature((0.1,)), 1.0, env)


def test_random_fallback_records_valid_configs():
    system, rec, env, cid = env_for("index", capacity_fraction=0.2)
    agent = agent_for("RL", system, cid)
    res = agent.run(CTX, 6.0, env)
    assert all(system.subspaces[cid.index].contains(r.configuration.values) for r in res.records)
    assert math.isfinite(res.performance)
