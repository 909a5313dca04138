"""RoPE frequency-base scaling and token-averaged loss aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

# Tuned bases for the 64K and 512K stages, set above the dynamic-NTK suggestion.
RECIPE_BASES = {1: 8.0e6, 2: 1.28e8}
RECIPE_LENGTHS = {0: 8192, 1: 65536, 2: 524288}
LLAMA3_BASE = 5.0e5


@dataclass(frozen=True)
class RopeConfig:
    original_base: float
    original_context: int
    target_context: int
    head_dim: int = 128

    def __post_init__(self):
        if self.original_base <= 0:
            raise ValueError("original_base must be positive")
        if self.original_context <= 0:
            raise ValueError("original_context must be positive")
        if self.target_context < self.original_context:
            raise ValueError(
                f"target context {self.target_context} is shorter than original {self.original_context}"
            )
        if self.head_dim < 4 or self.head_dim % 2:
            raise ValueError("head_dim must be an even integer >= 4")

    @property
    def scale(self) -> float:
        return self.target_context / self.original_context


def ntk_factor(t: float, head_dim: float) -> float:
    """Base multiplier t ** (d / (d - 2)) for a context extension by factor t."""
    return t ** (head_dim / (head_dim - 2))


def suggested_base(cfg: RopeConfig, multiplier: float = 1.0) -> float:
    """Dynamic-NTK frequency base for ``cfg``.

    ``multiplier`` lets callers over-scale on purpose (the tuned recipe values
    are roughly 2x the suggestion); it defaults to the plain suggestion.
    """
    return cfg.original_base * ntk_factor(cfg.scale, cfg.head_dim) * multiplier


def chained_base(base: float, lengths: Sequence[int], head_dim: int = 128) -> float:
    """Apply the NTK rule stage by stage, e.g. 8K -> 64K -> 512K."""
    for a, b in zip(lengths, lengths[1:]):
        base = suggested_base(RopeConfig(base, a, b, head_dim))
    return base


def recipe_base(stage: int) -> float:
    try:
        return RECIPE_BASES[stage]
    except KeyError:
        raise ValueError(f"unknown stage {stage!r}; expected 1 or 2") from None


@dataclass(frozen=True)
class LossShard:
    loss_sum: float
    token_count: int

    def __post_init__(self):
        if self.token_count < 0:
            raise ValueError("token_count must be non-negative")
        if self.token_count == 0 and self.loss_sum != 0:
            raise ValueError("a shard without tokens must have zero loss")

    def __add__(self, other: "LossShard") -> "LossShard":
        return LossShard(self.loss_sum + other.loss_sum, self.token_count + other.token_count)

    @property
    def mean(self) -> float:
        return self.loss_sum / self.token_count


def merge(shards: Iterable[LossShard]) -> LossShard:
    shards = list(shards)
    return LossShard(math.fsum(s.loss_sum for s in shards), sum(s.token_count for s in shards))


def token_avg(shards: Iterable[LossShard]) -> float:
    """Loss averaged over every valid token across all shards."""
    total = merge(shards)
    if total.token_count == 0:
        raise ValueError("no valid tokens")
    return total.loss_sum / total.token_count


def sequence_avg(shards: Iterable[LossShard]) -> float:
    """Conventional mean of per-shard means, for comparison; empty shards are skipped."""
    means = [s.mean for s in shards if s.token_count]
    if not means:
        raise ValueError("no valid tokens")
    return math.fsum(means) / len(means)
