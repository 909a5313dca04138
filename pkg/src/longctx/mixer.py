"""Stage-wise domain mixing over pools of packed sequences.

A mixture has two groups, ``long`` and ``short``. ``long_ratio`` is the
share of tokens drawn from the long group; inside a group each domain has a
weight, and a stage curriculum may further split a domain's tokens across
pack-length classes (e.g. half the code tokens from 512K documents, half
from 64K documents packed to 512K).

Sampling draws whole sequences. The target token share of every
(domain, length class) leaf is ``group_ratio * weight * split``; leaves are
drawn with probability proportional to target share divided by the leaf
pool's mean sequence length, so expected token fractions match the targets
even when leaves hold sequences of different lengths.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .packer import PackedSequence

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib
import tomli_w

log = logging.getLogger(__name__)

LONG = "long"
SHORT = "short"
GROUPS = (LONG, SHORT)
WEIGHT_TOL = 1e-9
PRESET_DIR = Path(__file__).parent / "presets"

PoolKey = Tuple[str, int]
Pools = Mapping[PoolKey, Sequence[PackedSequence]]


@dataclass
class DomainSpec:
    name: str
    weight: float
    group: str = LONG
    pool: str = ""
    length: int = 65536


@dataclass
class MixtureSpec:
    domains: List[DomainSpec]
    long_ratio: float
    stage: str = "stage1"
    seed: int = 0

    def group(self, name: str) -> List[DomainSpec]:
        return [d for d in self.domains if d.group == name]

    def group_ratio(self, name: str) -> float:
        return self.long_ratio if name == LONG else 1.0 - self.long_ratio

    def domain(self, name: str) -> DomainSpec:
        for d in self.domains:
            if d.name == name:
                return d
        raise KeyError(name)

    def target_fractions(self) -> Dict[str, float]:
        return {d.name: self.group_ratio(d.group) * d.weight for d in self.domains}


@dataclass
class StageCurriculum:
    splits: Dict[str, Dict[int, float]] = field(default_factory=dict)
    budget_tokens: int = 20 * 2**30
    batch_tokens: int = 4 * 2**20
    # length of every emitted training sequence in this stage
    seq_len: int = 65536

    def split_for(self, domain: DomainSpec) -> Dict[int, float]:
        return self.splits.get(domain.name) or {domain.length: 1.0}


class PoolExhausted(RuntimeError):
    pass


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def validate_spec(
    spec: MixtureSpec,
    curriculum: Optional[StageCurriculum] = None,
    pools: Optional[Union[Pools, Callable[[PoolKey], bool]]] = None,
) -> List[str]:
    """Return every invariant violation; an empty list means the spec is usable."""
    problems: List[str] = []
    if not 0.0 <= spec.long_ratio <= 1.0:
        problems.append(f"long_ratio {_fmt(spec.long_ratio)} outside [0, 1]")
    names = [d.name for d in spec.domains]
    for n in sorted({n for n in names if names.count(n) > 1}):
        problems.append(f"domain {n!r} declared more than once")
    for d in spec.domains:
        if d.group not in GROUPS:
            problems.append(f"domain {d.name!r} has unknown group {d.group!r}")
        if not 0.0 <= d.weight <= 1.0:
            problems.append(f"domain {d.name!r} weight {_fmt(d.weight)} outside [0, 1]")
    for g in GROUPS:
        members = spec.group(g)
        ratio = spec.group_ratio(g)
        if not members:
            if ratio > 0 and 0.0 <= spec.long_ratio <= 1.0:
                problems.append(f"{g} group is empty but receives {_fmt(ratio)} of tokens")
            continue
        total = math.fsum(d.weight for d in members)
        if abs(total - 1.0) > WEIGHT_TOL:
            problems.append(f"{g} group sums to {_fmt(total)}")

    if curriculum is not None:
        if curriculum.budget_tokens <= 0:
            problems.append("token budget must be positive")
        if curriculum.batch_tokens <= 0:
            problems.append("batch size must be positive")
        for name, split in curriculum.splits.items():
            if name not in names:
                problems.append(f"curriculum splits unknown domain {name!r}")
            if any(f < 0 for f in split.values()):
                problems.append(f"curriculum split for {name!r} has a negative share")
            total = math.fsum(split.values())
            if abs(total - 1.0) > WEIGHT_TOL:
                problems.append(f"curriculum split for {name!r} sums to {_fmt(total)}")

    if pools is not None:
        has = pools if callable(pools) else (lambda key: bool(pools.get(key)))
        cur = curriculum or StageCurriculum()
        for d in spec.domains:
            if d.weight <= 0 or spec.group_ratio(d.group) <= 0:
                continue
            for length, share in cur.split_for(d).items():
                if share > 0 and not has((d.name, length)):
                    problems.append(f"pool not found or empty: {d.name} at length {length}")
    return problems


def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


@dataclass
class MixStats:
    sequences: int = 0
    tokens: int = 0
    domain_tokens: Dict[str, int] = field(default_factory=dict)
    leaf_tokens: Dict[PoolKey, int] = field(default_factory=dict)
    epochs: Dict[PoolKey, int] = field(default_factory=dict)

    def fractions(self) -> Dict[str, float]:
        return {k: v / self.tokens for k, v in self.domain_tokens.items()} if self.tokens else {}

    def as_dict(self) -> dict:
        return {
            "sequences": self.sequences,
            "tokens": self.tokens,
            "domain_tokens": dict(sorted(self.domain_tokens.items())),
            "leaf_tokens": {f"{d}@{n}": t for (d, n), t in sorted(self.leaf_tokens.items())},
            "epochs": {f"{d}@{n}": e for (d, n), e in sorted(self.epochs.items())},
        }


class _PoolCursor:
    """Walks a pool in seeded-shuffled order, reshuffling at each new epoch."""

    def __init__(self, pool: Sequence[PackedSequence], seed: int, leaf: int, wrap: bool, key: PoolKey):
        self.pool = pool
        self.seed, self.leaf, self.wrap, self.key = seed, leaf, wrap, key
        self.epoch = 0
        self._new_order()

    def _new_order(self):
        self.order = _rng(self.seed, self.leaf, self.epoch).permutation(len(self.pool))
        self.pos = 0

    def next(self) -> PackedSequence:
        if self.pos == len(self.order):
            if not self.wrap:
                raise PoolExhausted(f"pool {self.key[0]}@{self.key[1]} exhausted")
            self.epoch += 1
            log.info("pool %s@%d wrapped, epoch %d", self.key[0], self.key[1], self.epoch)
            self._new_order()
        seq = self.pool[self.order[self.pos]]
        self.pos += 1
        return seq


def leaf_targets(spec: MixtureSpec, curriculum: Optional[StageCurriculum] = None) -> Dict[PoolKey, float]:
    """Target token share per (domain, length class), in spec order."""
    cur = curriculum or StageCurriculum()
    out: Dict[PoolKey, float] = {}
    for d in spec.domains:
        r = spec.group_ratio(d.group) * d.weight
        for length, share in sorted(cur.split_for(d).items()):
            if r * share > 0:
                out[(d.name, int(length))] = r * share
    return out


def sample_stream(
    spec: MixtureSpec,
    curriculum: Optional[StageCurriculum],
    pools: Pools,
    n_tokens: Optional[int] = None,
    wrap: bool = True,
    stats: Optional[MixStats] = None,
    block: int = 1024,
) -> Iterator[PackedSequence]:
    """Yield sequences drawn from ``pools`` until ``n_tokens`` have been emitted.

    The stream depends only on (spec, curriculum, pools, spec.seed). With
    ``wrap=False`` running out of a pool raises PoolExhausted.
    """
    problems = validate_spec(spec, curriculum, pools)
    if problems:
        raise ValueError("invalid mixture: " + "; ".join(problems))
    cur = curriculum or StageCurriculum()
    budget = cur.budget_tokens if n_tokens is None else n_tokens
    stats = stats if stats is not None else MixStats()

    targets = leaf_targets(spec, cur)
    keys = list(targets)
    mean_len = np.array([np.mean([s.length for s in pools[k]]) for k in keys])
    p = np.array([targets[k] for k in keys]) / mean_len
    p /= p.sum()
    cursors = [_PoolCursor(pools[k], spec.seed, i, wrap, k) for i, k in enumerate(keys)]
    draws = _rng(spec.seed, 0xD1CE)

    while stats.tokens < budget:
        for i in draws.choice(len(keys), size=block, p=p):
            seq = cursors[i].next()
            key = keys[i]
            stats.sequences += 1
            stats.tokens += seq.length
            stats.domain_tokens[key[0]] = stats.domain_tokens.get(key[0], 0) + seq.length
            stats.leaf_tokens[key] = stats.leaf_tokens.get(key, 0) + seq.length
            stats.epochs[key] = cursors[i].epoch
            yield seq
            if stats.tokens >= budget:
                break


def dedup_pools(
    pool_64k: Sequence[PackedSequence],
    pool_512k: Sequence[PackedSequence],
) -> Tuple[List[PackedSequence], List[PackedSequence], int]:
    """Drop 64K-class sequences sharing any origin document with the 512K pool.

    Returns (filtered 64K pool, 512K pool, number of sequences removed).
    """
    taken = {oid for s in pool_512k for oid in s.origin_ids}
    kept = [s for s in pool_64k if taken.isdisjoint(s.origin_ids)]
    return kept, list(pool_512k), len(pool_64k) - len(kept)


def convergence_bound(weight: float, seq_len: int, n_tokens: int, k: float = 4.0) -> float:
    """k standard deviations of a domain's token fraction under whole-sequence draws."""
    return k * math.sqrt(weight * (1.0 - weight) * seq_len / n_tokens)


# --- configuration files ---------------------------------------------------


def spec_to_dict(spec: MixtureSpec, curriculum: Optional[StageCurriculum] = None) -> dict:
    out: dict = {
        "stage": spec.stage,
        "seed": spec.seed,
        "long_ratio": spec.long_ratio,
        "domains": [
            {"name": d.name, "group": d.group, "weight": d.weight, "length": d.length, "pool": d.pool}
            for d in spec.domains
        ],
    }
    if curriculum is not None:
        out["curriculum"] = {
            "budget_tokens": curriculum.budget_tokens,
            "batch_tokens": curriculum.batch_tokens,
            "seq_len": curriculum.seq_len,
            "splits": {n: {str(k): v for k, v in s.items()} for n, s in curriculum.splits.items()},
        }
    return out


def spec_from_dict(data: dict) -> Tuple[MixtureSpec, StageCurriculum]:
    domains = [
        DomainSpec(
            name=str(d["name"]),
            weight=float(d["weight"]),
            group=str(d.get("group", LONG)),
            pool=str(d.get("pool", "")),
            length=int(d.get("length", 65536)),
        )
        for d in data.get("domains", [])
    ]
    spec = MixtureSpec(domains, float(data.get("long_ratio", 1.0)), str(data.get("stage", "")),
                       int(data.get("seed", 0)))
    c = data.get("curriculum", {})
    cur = StageCurriculum(
        splits={n: {int(k): float(v) for k, v in s.items()} for n, s in c.get("splits", {}).items()},
        budget_tokens=int(c.get("budget_tokens", 20 * 2**30)),
        batch_tokens=int(c.get("batch_tokens", 4 * 2**20)),
        seq_len=int(c.get("seq_len", 65536)),
    )
    return spec, cur


def dumps(spec: MixtureSpec, curriculum: Optional[StageCurriculum] = None) -> str:
    return tomli_w.dumps(spec_to_dict(spec, curriculum))


def loads(text: str) -> Tuple[MixtureSpec, StageCurriculum]:
    return spec_from_dict(tomllib.loads(text))


def load(path: Union[str, os.PathLike]) -> Tuple[MixtureSpec, StageCurriculum]:
    with open(path, "rb") as fh:
        return spec_from_dict(tomllib.load(fh))


def preset_path(name: str) -> Path:
    p = PRESET_DIR / f"{name}.toml"
    if not p.exists():
        known = sorted(q.stem for q in PRESET_DIR.glob("*.toml"))
        raise FileNotFoundError(f"unknown preset {name!r}; available: {known}")
    return p


def load_preset(name: str) -> Tuple[MixtureSpec, StageCurriculum]:
    return load(preset_path(name))


def pool_path(domain: DomainSpec, length: int, base: Union[str, os.PathLike] = ".") -> Path:
    ref = domain.pool or f"{domain.name}.{{length}}.seqs"
    return Path(base) / ref.format(length=length, name=domain.name)
