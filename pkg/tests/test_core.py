import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotune.core import (ComponentId, Configuration, ContextFeature, EvaluationRecord, InvalidConfiguration,
                         JointConfiguration, ProductSpace, RewardHistory, Subspace, SubspaceKind,
                         TransitionRecord, TuningTask, dumps, loads, validate)
from cotune.rng import make_rng

K, I, Q = ComponentId(0, "knob"), ComponentId(1, "index"), ComponentId(2, "query")


def test_binary_capacity_boundary():
    sub = Subspace.binary(3, weights=(1.0, 2.0, 3.0), capacity=5.0)
    assert sub.contains((False, True, True))  # usage exactly 5
    assert not sub.contains((True, True, True))
    assert not validate(Configuration(I, (True, True, True)), sub)


def test_box_bounds_and_dims():
    sub = Subspace.box([0.0, 0.0], [1.0, 2.0])
    assert sub.contains((1.0, 2.0))
    assert not sub.contains((1.0, 2.5))
    assert not sub.contains((0.5,))
    assert not sub.contains((math.nan, 0.0))
    assert sub.default == (0.5, 1.0)


def test_categorical_one_hot_encoding():
    sub = Subspace.categorical([2, 3])
    np.testing.assert_array_equal(sub.encode((1, 2)), [0, 1, 0, 0, 1])
    assert sub.encoding_length == 5
    assert not sub.contains((2, 0))


def test_subspace_rejects_bad_definitions():
    with pytest.raises(ValueError):
        Subspace.box([1.0], [0.0])
    with pytest.raises(ValueError):
        Subspace.categorical([1])
    with pytest.raises(ValueError):
        Subspace.binary(2, weights=(1.0, 1.0))
    with pytest.raises(ValueError):
        Subspace.binary(2, weights=(1.0, 1.0), capacity=1.0, default=(True, True))


def test_sampling_includes_subsets_at_exact_capacity():
    # all four bits fit exactly; the sampler must not exclude that subset
    w = (0.1, 0.2, 0.3, 0.4)
    sub = Subspace.binary(4, weights=w, capacity=math.fsum(w))
    draws = sub.sample_array(make_rng(0, "t"), 4000)
    assert draws.all(axis=1).any()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 5.0), min_size=1, max_size=12), st.floats(0.0, 1.0), st.integers(0, 2 ** 31))
def test_sampled_binary_configs_respect_capacity(weights, frac, seed):
    sub = Subspace.binary(len(weights), weights=weights, capacity=frac * sum(weights))
    for values in sub.sample(make_rng(seed, "t"), 50):
        assert sub.contains(values)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 31))
def test_sampled_box_and_categorical_valid(d, seed):
    rng = make_rng(seed, "t")
    box = Subspace.box([-1.0] * d, [2.0] * d)
    cat = Subspace.categorical([2 + i for i in range(d)])
    assert all(box.contains(v) for v in box.sample(rng, 30))
    assert all(cat.contains(v) for v in cat.sample(rng, 30))


def test_load_rejects_fractional_category():
    sub = Subspace.categorical([3])
    with pytest.raises(InvalidConfiguration):
        sub.load([1.5])
    assert sub.load([2.0]) == (2,)


def test_joint_configuration_order_and_replace():
    joint = JointConfiguration((Configuration(Q, (1,)), Configuration(K, (0.5,)), Configuration(I, (True,))))
    assert [c.component.name for c in joint.configs] == ["knob", "index", "query"]
    new = joint.replace(Configuration(I, (False,)))
    assert new.by_name("index").values == (False,)
    assert joint.by_name("index").values == (True,)
    with pytest.raises(ValueError):
        JointConfiguration((Configuration(K, (0.5,)), Configuration(Q, (1,))))


def test_records_round_trip_through_json():
    ctx = ContextFeature((0.1, 0.2), 3)
    cfg = Configuration(K, (0.25, 0.75))
    rec = EvaluationRecord(ctx, cfg, 1.5, 1.0, 3)
    assert EvaluationRecord.from_record(loads(dumps(rec.to_record()))) == rec
    tr = TransitionRecord((0.1,), cfg, (0.2,), -0.5)
    assert TransitionRecord.from_record(loads(dumps(tr.to_record()))) == tr
    joint = JointConfiguration((cfg, Configuration(I, (True, False)), Configuration(Q, (2,))))
    subs = [Subspace.box([0, 0], [1, 1]), Subspace.binary(2), Subspace.categorical([3])]
    assert JointConfiguration.from_record(loads(dumps(joint.to_record())), subs) == joint
    h = RewardHistory(K, [0.0, 2.5])
    assert RewardHistory.from_record(loads(dumps(h.to_record()))) == h


def test_subspace_record_round_trip():
    sub = Subspace.binary(3, weights=(1, 2, 3), capacity=4)
    assert Subspace.from_record(loads(dumps(sub.to_record()))) == sub


def test_record_validation():
    ctx = ContextFeature((0.0,))
    with pytest.raises(ValueError):
        EvaluationRecord(ctx, Configuration(K, (0.0,)), math.inf, 1.0)
    with pytest.raises(ValueError):
        EvaluationRecord(ctx, Configuration(K, (0.0,)), 1.0, -1.0)
    with pytest.raises(ValueError):
        ContextFeature((math.nan,))
    with pytest.raises(ValueError):
        TransitionRecord((0.0,), Configuration(K, (0.0,)), (0.0, 1.0), 0.0)
    h = RewardHistory(K)
    with pytest.raises(ValueError):
        h.append(-0.1)


def test_tuning_task_validation():
    comps = ((K, "BO"), (I, "BO"), (Q, "RLEstimator"))
    task = TuningTask(comps, tuning_budget=100, sub_budget=10)
    assert task.buffer_size == 7
    assert TuningTask.from_record(loads(dumps(task.to_record()))) == task
    with pytest.raises(ValueError):
        TuningTask((), tuning_budget=100, sub_budget=10)
    with pytest.raises(ValueError):
        TuningTask(comps, tuning_budget=5, sub_budget=10)
    with pytest.raises(ValueError):
        TuningTask(((K, "SGD"),), tuning_budget=100, sub_budget=10)
    with pytest.raises(ValueError):
        TuningTask(comps, tuning_budget=100, sub_budget=10, buffer_size=0)


def test_product_space_encoding_is_concatenation():
    subs = [Subspace.box([0, 0], [1, 1]), Subspace.binary(3), Subspace.categorical([2, 4])]
    space = ProductSpace(subs)
    assert space.encoding_length == 2 + 3 + 6
    values = ((0.2, 0.4), (True, False, True), (1, 3))
    np.testing.assert_array_equal(space.encode(values), np.concatenate([s.encode(v) for s, v in zip(subs, values)]))
    for v in space.sample(make_rng(1, "t"), 20):
        assert space.contains(v)


def test_dumps_rejects_nan():
    with pytest.raises(ValueError):
        dumps({"x": math.nan})


def test_subspace_kind_values():
    assert SubspaceKind("binary-set") is SubspaceKind.BINARY
