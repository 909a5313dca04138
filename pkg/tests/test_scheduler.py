import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import fake_pool
from longctx.scheduler import (
    STAGE_BATCH_TOKENS,
    STAGE_BUDGETS,
    CostModel,
    StepPlan,
    cost,
    full_attention_cost,
    makespan,
    manifest_order,
    reorder,
    step_minibatches,
    throughput_report,
)


def optimal_makespan(costs, D, A):
    """Exhaustive oracle: every assignment of minibatches to the D x A grid."""
    best = float("inf")
    for perm in itertools.permutations(costs):
        best = min(best, sum(max(perm[k * D : (k + 1) * D]) for k in range(A)))
    return best


def test_cost_examples():
    (seq,) = fake_pool("x", 1, 5, segments=1)
    assert cost(seq) == 25 == full_attention_cost(seq)
    from longctx.packer import PackedSequence

    two = PackedSequence(np.zeros(5), (0, 2, 5), ("a", "b"), ("p", "q"), (0, 0))
    assert cost(two) == 13
    (packed,) = fake_pool("x", 1, 65536, segments=64)
    assert cost(packed) == 64 * 1024**2 == full_attention_cost(packed) / 64
    assert cost([two, seq]) == 38
    assert CostModel(linear=2).segments([2, 3]) == 23
    with pytest.raises(TypeError):
        cost("nope")


def test_worked_four_minibatch_example():
    costs = [100, 1, 100, 1]
    assert makespan(manifest_order(costs, 2, 2)) == 200
    plan = reorder(costs, 2, 2)
    assert plan.grid == ((1, 3), (0, 2))
    assert makespan(plan) == 101
    assert optimal_makespan(costs, 2, 2) == 101


def test_makespan_of_single_micro_step():
    plan = StepPlan(2, 1, ((0, 1),), np.array([[13.0, 25.0]]))
    assert makespan(plan) == 25


def test_plan_invariants():
    with pytest.raises(ValueError):
        StepPlan(2, 0, (), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        StepPlan(2, 1, ((0, 0),), np.zeros((1, 2)))
    with pytest.raises(ValueError):
        reorder([1, 2, 3], 2, 2)


def test_equal_costs_and_single_device():
    assert makespan(reorder([7] * 8, 4, 2)) == makespan(manifest_order([7] * 8, 4, 2))
    c = [5, 1, 9, 3]
    assert makespan(reorder(c, 1, 4)) == makespan(manifest_order(c, 1, 4)) == 18


def test_ties_keep_manifest_order():
    assert reorder([3, 1, 3, 1], 2, 2).grid == ((1, 3), (0, 2))


workload = st.tuples(st.sampled_from([1, 2, 3, 4]), st.sampled_from([1, 2])).flatmap(
    lambda da: st.tuples(st.just(da[0]), st.just(da[1]),
                         st.lists(st.integers(0, 1000), min_size=da[0] * da[1], max_size=da[0] * da[1]))
)


@given(workload)
def test_sorted_dominates_and_is_optimal(w):
    D, A, costs = w
    s = makespan(reorder(costs, D, A))
    assert s <= makespan(manifest_order(costs, D, A))
    # consecutive grouping of the sorted list is optimal for a sum of group maxima
    assert s == optimal_makespan(costs, D, A)


@given(st.sampled_from([2, 4, 8]), st.sampled_from([1, 2, 4]), st.data())
def test_reorder_is_a_permutation(D, A, data):
    costs = data.draw(st.lists(st.floats(0, 1e6), min_size=D * A, max_size=D * A))
    plan = reorder(costs, D, A)
    rows = step_minibatches(plan, costs)
    assert Counter(x for r in rows for x in r) == Counter(costs)
    assert all(len(r) == D for r in rows)


def test_throughput_report_identical_workload():
    rep = throughput_report(fake_pool("x", 64, 1024, segments=4), 8, 4)
    assert rep.steps == 2 and rep.speedup == 0.0
    assert rep.tokens == 64 * 1024


def test_throughput_report_mixed_workload():
    packs = fake_pool("x", 32, 65536, segments=64)
    singles = fake_pool("y", 32, 65536, segments=1)
    data = [s for pair in zip(packs, singles) for s in pair]
    rep = throughput_report(data, 8, 4)
    assert rep.speedup > 0
    assert rep.budget_progress()["stage1"] == 64 * 65536 / STAGE_BUDGETS[1]
    lines = rep.to_csv().splitlines()
    assert lines[0] == "step,unsorted_makespan,sorted_makespan" and len(lines) == 3
    assert "modeled_speedup" in rep.to_text()


def test_stage_constants_use_binary_prefixes():
    assert STAGE_BUDGETS[1] == 20 * 2**30
    assert STAGE_BATCH_TOKENS == {1: 4 * 2**20, 2: 8 * 2**20}
