"""Synthetic evaluation inputs: JSON key-value recall and class-balanced ICL."""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

HEX = "0123456789abcdef"
ALNUM = string.ascii_lowercase + string.digits


def _rng(seed: int, *salt: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *salt])))


def _random_strings(rng: np.random.Generator, n: int, length: int, alphabet: str) -> List[str]:
    idx = rng.integers(0, len(alphabet), size=(n, length))
    table = np.array(list(alphabet))
    return ["".join(row) for row in table[idx]]


@dataclass(frozen=True)
class KvTask:
    pairs: Tuple[Tuple[str, str], ...]
    query_key: str
    gold_value: str
    seed: int
    context_length_target: Optional[int] = None

    def context_json(self) -> str:
        """The haystack: one single-line JSON object with all pairs in order."""
        return json.dumps(dict(self.pairs))

    def to_json(self) -> str:
        rec = {
            "context": self.context_json(),
            "query_key": self.query_key,
            "gold_value": self.gold_value,
            "num_pairs": len(self.pairs),
            "seed": self.seed,
        }
        if self.context_length_target is not None:
            rec["context_length_target"] = self.context_length_target
        return json.dumps(rec, sort_keys=True)


def gen_kv(
    n_pairs: int,
    seed: int,
    key_len: int = 32,
    val_len: int = 32,
    alphabet: str = HEX,
    context_length_target: Optional[int] = None,
) -> KvTask:
    """Random unique keys and values of fixed length; the query position is uniform."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if len(alphabet) ** key_len < 2 * n_pairs:
        raise ValueError("key space too small for unique keys")
    rng = _rng(seed, 1)
    keys: List[str] = []
    seen = set()
    while len(keys) < n_pairs:
        for k in _random_strings(rng, n_pairs - len(keys), key_len, alphabet):
            if k not in seen:
                seen.add(k)
                keys.append(k)
    values = _random_strings(rng, n_pairs, val_len, alphabet)
    q = int(rng.integers(0, n_pairs))
    return KvTask(tuple(zip(keys, values)), keys[q], values[q], seed, context_length_target)


def whitespace_count(text: str) -> int:
    return len(text.split())


def fit_kv(
    target_tokens: int,
    seed: int,
    key_len: int = 32,
    val_len: int = 32,
    count: Callable[[str], int] = whitespace_count,
    tolerance: float = 0.02,
    max_iter: int = 30,
) -> KvTask:
    """Find a pair count whose serialized context lands within ``tolerance`` of the target.

    Starts from a per-pair token estimate measured on a small probe and
    refines by secant steps on the measured count.
    """
    probe = gen_kv(16, seed, key_len, val_len)
    per_pair = max(count(probe.context_json()) / 16, 1e-9)
    n = max(1, round(target_tokens / per_pair))
    best: Optional[Tuple[float, KvTask]] = None
    for _ in range(max_iter):
        task = gen_kv(n, seed, key_len, val_len, context_length_target=target_tokens)
        got = count(task.context_json())
        err = abs(got - target_tokens) / target_tokens
        if best is None or err < best[0]:
            best = (err, task)
        if err <= tolerance:
            return task
        n = max(1, round(n * target_tokens / max(got, 1)))
    assert best is not None
    return best[1]


def lookup(task_json: str) -> Tuple[str, str]:
    """Parse a serialized task and return (value found at query_key, gold_value)."""
    rec = json.loads(task_json)
    return json.loads(rec["context"])[rec["query_key"]], rec["gold_value"]


@dataclass(frozen=True)
class IclTask:
    classes: Tuple[Hashable, ...]
    label_map: Dict[Hashable, int]
    demos: Tuple[Tuple[str, int], ...]
    query: str
    gold: int
    k: int
    seed: int

    def header(self) -> dict:
        return {
            "type": "icl",
            "k": self.k,
            "seed": self.seed,
            "num_classes": len(self.classes),
            "label_map": {str(c): self.label_map[c] for c in self.classes},
            "query": self.query,
            "gold": self.gold,
        }

    def to_ndjson(self) -> str:
        lines = [json.dumps(self.header(), sort_keys=True)]
        lines += [json.dumps({"input": x, "label": y}, sort_keys=True) for x, y in self.demos]
        return "\n".join(lines) + "\n"

    def prompt(self) -> str:
        shots = "\n\n".join(f"{x}\nlabel: {y}" for x, y in self.demos)
        return f"{shots}\n\n{self.query}\nlabel:"


def gen_icl(
    dataset: Sequence[Tuple[str, Hashable]],
    k: int,
    seed: int,
    query_index: Optional[int] = None,
) -> IclTask:
    """Sample exactly ``k`` demos per class with numeric labels 1..C.

    The label assignment is a seeded permutation of the classes; demo order
    is a seeded shuffle. The query is held out of the demos.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = _rng(seed, 2)
    by_class: Dict[Hashable, List[int]] = {}
    for i, (_, label) in enumerate(dataset):
        by_class.setdefault(label, []).append(i)
    classes = sorted(by_class, key=str)
    if query_index is None:
        query_index = int(rng.integers(0, len(dataset)))
    q_label = dataset[query_index][1]
    for c in classes:
        pool = [i for i in by_class[c] if i != query_index]
        if len(pool) < k:
            raise ValueError(f"class {c!r} has {len(pool)} usable examples, fewer than k={k}")
    perm = rng.permutation(len(classes))
    label_map = {c: int(perm[i]) + 1 for i, c in enumerate(classes)}
    chosen: List[int] = []
    for c in classes:
        pool = np.array([i for i in by_class[c] if i != query_index])
        chosen.extend(pool[rng.choice(len(pool), size=k, replace=False)].tolist())
    order = rng.permutation(len(chosen))
    demos = tuple((dataset[chosen[i]][0], label_map[dataset[chosen[i]][1]]) for i in order)
    return IclTask(tuple(classes), label_map, demos, dataset[query_index][0], label_map[q_label], k, seed)
