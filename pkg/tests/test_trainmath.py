import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from longctx.trainmath import (
    LLAMA3_BASE,
    LossShard,
    RopeConfig,
    chained_base,
    merge,
    ntk_factor,
    recipe_base,
    sequence_avg,
    suggested_base,
    token_avg,
)


def test_suggested_base_8k_to_64k():
    b = suggested_base(RopeConfig(LLAMA3_BASE, 8192, 65536, 128))
    # oracle: 5e5 * 8 ** (128 / 126) evaluated independently
    assert b == pytest.approx(500000 * math.exp(math.log(8) * 128 / 126), rel=1e-12)
    assert b == pytest.approx(4.07e6, rel=0.02)


def test_chained_base_64k_to_512k():
    b = suggested_base(RopeConfig(recipe_base(1), 65536, 524288))
    assert b == pytest.approx(6.58e7, rel=0.03)
    assert chained_base(8e6, [65536, 524288]) == b


def test_chaining_composes():
    direct = chained_base(LLAMA3_BASE, [8192, 524288])
    two_step = chained_base(LLAMA3_BASE, [8192, 65536, 524288])
    assert two_step == pytest.approx(direct, rel=1e-12)


def test_identity_and_errors():
    assert suggested_base(RopeConfig(1e4, 4096, 4096)) == 1e4
    with pytest.raises(ValueError):
        RopeConfig(5e5, 65536, 8192)
    with pytest.raises(ValueError):
        RopeConfig(5e5, 8192, 65536, head_dim=127)
    with pytest.raises(ValueError):
        recipe_base(3)


def test_multiplier():
    cfg = RopeConfig(LLAMA3_BASE, 8192, 65536)
    assert suggested_base(cfg, 2.0) == 2 * suggested_base(cfg)


def test_recipe_bases():
    assert recipe_base(1) == 8.0e6
    assert recipe_base(2) == 1.28e8


@given(st.floats(1.0, 1e3), st.integers(2, 128).map(lambda h: 2 * h))
def test_ntk_factor_monotone_in_t(t, d):
    assert ntk_factor(t, d) >= t
    assert ntk_factor(t * 1.5, d) > ntk_factor(t, d)


def test_token_avg_examples():
    shards = [LossShard(10, 5), LossShard(6, 1)]
    assert token_avg(shards) == 16 / 6
    assert sequence_avg(shards) == 4.0
    assert token_avg([LossShard(8, 4)]) == 2.0
    eq = [LossShard(3, 2), LossShard(5, 2), LossShard(1, 2)]
    assert token_avg(eq) == pytest.approx(sequence_avg(eq))


def test_no_valid_tokens():
    with pytest.raises(ValueError, match="no valid tokens"):
        token_avg([LossShard(0, 0), LossShard(0, 0)])
    with pytest.raises(ValueError):
        token_avg([])
    with pytest.raises(ValueError):
        LossShard(1.0, 0)


shard_st = st.builds(
    lambda mean, n: LossShard(mean * n, n), st.floats(0, 20, allow_nan=False), st.integers(0, 10_000)
)


@given(st.lists(shard_st, min_size=1, max_size=30).filter(lambda s: any(x.token_count for x in s)))
def test_token_avg_is_order_and_grouping_invariant(shards):
    whole = token_avg(shards)
    assert token_avg(reversed(shards)) == pytest.approx(whole, rel=1e-12)
    mid = len(shards) // 2
    regrouped = [merge(shards[:mid]), merge(shards[mid:])]
    assert token_avg(regrouped) == pytest.approx(whole, rel=1e-12)
