import json
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from longctx.evalgen import ALNUM, fit_kv, gen_icl, gen_kv, lookup, whitespace_count


def test_kv_parse_back():
    task = gen_kv(100, seed=1)
    obj = json.loads(task.context_json())
    assert len(obj) == 100
    assert obj[task.query_key] == task.gold_value
    assert lookup(task.to_json()) == (task.gold_value, task.gold_value)


def test_kv_single_pair():
    task = gen_kv(1, seed=4)
    assert task.query_key == task.pairs[0][0]


def test_kv_is_single_line_and_deterministic():
    a, b = gen_kv(50, seed=9), gen_kv(50, seed=9)
    assert a.to_json() == b.to_json()
    assert "\n" not in a.context_json()
    assert gen_kv(50, seed=10).to_json() != a.to_json()


def test_kv_key_lengths_and_errors():
    task = gen_kv(20, seed=0, key_len=36, val_len=36, alphabet=ALNUM)
    assert all(len(k) == 36 and len(v) == 36 for k, v in task.pairs)
    with pytest.raises(ValueError):
        gen_kv(0, seed=0)
    with pytest.raises(ValueError):
        gen_kv(10, seed=0, key_len=1, alphabet="ab")


def test_fit_kv_hits_target():
    target = 64 * 1024
    task = fit_kv(target, seed=2, key_len=36, val_len=36)
    got = whitespace_count(task.context_json())
    assert abs(got - target) / target <= 0.02
    assert json.loads(task.to_json())["context_length_target"] == target


@given(st.integers(1, 300), st.integers(0, 2**32 - 1))
def test_kv_lookup_property(n, seed):
    found, gold = lookup(gen_kv(n, seed).to_json())
    assert found == gold


def labeled(counts):
    return [(f"{c}-{i}", c) for c, n in counts.items() for i in range(n)]


def test_icl_balance():
    data = labeled({c: 15 for c in "abcdef"})
    task = gen_icl(data, k=10, seed=3)
    assert len(task.demos) == 60
    assert set(Counter(y for _, y in task.demos).values()) == {10}
    assert sorted(task.label_map.values()) == list(range(1, 7))


def test_icl_too_small_class_named():
    data = labeled({"big": 20, "tiny": 3})
    with pytest.raises(ValueError, match="'tiny'"):
        gen_icl(data, k=5, seed=0)


def test_icl_seeds_shuffle_same_demos():
    # with exactly k usable examples per class the demo multiset is forced
    data = labeled({"x": 4, "y": 4, "z": 4}) + [("query", "x")]
    a = gen_icl(data, 4, seed=1, query_index=len(data) - 1)
    b = gen_icl(data, 4, seed=2, query_index=len(data) - 1)
    assert Counter(x for x, _ in a.demos) == Counter(x for x, _ in b.demos)
    assert [x for x, _ in a.demos] != [x for x, _ in b.demos]


def test_icl_query_held_out_and_gold_consistent():
    data = labeled({"pos": 12, "neg": 12, "neu": 12})
    for seed in range(20):
        t = gen_icl(data, 8, seed)
        assert t.query not in {x for x, _ in t.demos}
        true_class = t.query.split("-")[0]
        assert t.gold == t.label_map[true_class]
        for x, y in t.demos:
            assert t.label_map[x.split("-")[0]] == y


def test_icl_serialization_deterministic():
    data = labeled({1: 6, 2: 6})
    a = gen_icl(data, 3, seed=5).to_ndjson()
    assert a == gen_icl(data, 3, seed=5).to_ndjson()
    header = json.loads(a.splitlines()[0])
    assert header["num_classes"] == 2 and len(a.splitlines()) == 7
    assert gen_icl(data, 3, seed=5).prompt().endswith("label:")
