"""Synthetic corpora for tests, benchmarks and the end-to-end pipeline."""

from __future__ import annotations

import json
import os
from typing import Dict, Iterator, List, Sequence, Tuple, Union

import numpy as np

from .corpus import TOKEN_DTYPE, Document

VOCAB = 50_000

# Percent of documents longer than 4K / 8K / 16K / 32K tokens per short
# component, and the component document shares of the 64K-ablation short mix.
SHORT_LENGTH_TAILS: Dict[str, Tuple[float, float, float, float]] = {
    "fineweb": (1.4, 0.3, 0.1, 0.0),
    "fineweb_edu": (2.8, 0.8, 0.2, 0.0),
    "wikipedia": (1.6, 0.4, 0.0, 0.0),
    "tulu_v2": (0.0, 0.0, 0.0, 0.0),
    "stackexchange": (0.6, 0.1, 0.0, 0.0),
    "arxiv": (85.7, 64.0, 30.3, 7.6),
    "openwebmath": (11.1, 4.3, 1.2, 0.3),
}
SHORTMIX_WEIGHTS: Dict[str, float] = {
    "fineweb": 0.25,
    "fineweb_edu": 0.25,
    "wikipedia": 0.10,
    "tulu_v2": 0.10,
    "stackexchange": 0.10,
    "arxiv": 0.10,
    "openwebmath": 0.10,
}
_BIN_EDGES = (64, 4096, 8192, 16384, 32768, 131072)


def _rng(seed: int, *salt: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *salt])))


def short_lengths(domain: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """Document lengths whose >4K/8K/16K/32K tail fractions match ``SHORT_LENGTH_TAILS``."""
    tails = np.array((100.0,) + SHORT_LENGTH_TAILS[domain] + (0.0,)) / 100.0
    p_bins = tails[:-1] - tails[1:]
    bins = rng.choice(len(p_bins), size=n, p=p_bins / p_bins.sum())
    lo = np.array(_BIN_EDGES[:-1])[bins] + (bins > 0)
    hi = np.array(_BIN_EDGES[1:])[bins]
    return rng.integers(lo, hi + 1)


def shortmix_lengths(n: int, seed: int) -> List[Tuple[str, int]]:
    """(domain, length) draws for a ShortMix-like corpus, domains by document share."""
    rng = _rng(seed, 7)
    names = list(SHORTMIX_WEIGHTS)
    w = np.array([SHORTMIX_WEIGHTS[k] for k in names])
    doms = rng.choice(len(names), size=n, p=w / w.sum())
    out: List[Tuple[str, int]] = []
    lengths = {i: iter(short_lengths(names[i], int((doms == i).sum()), rng)) for i in range(len(names))}
    for d in doms:
        out.append((names[d], int(next(lengths[d]))))
    return out


def random_tokens(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(1, VOCAB, size=n, dtype=TOKEN_DTYPE)


def random_documents(
    n: int,
    seed: int,
    min_len: int = 1,
    max_len: int = 200_000,
    domains: Sequence[str] = ("books", "fineweb", "arxiv"),
) -> List[Document]:
    rng = _rng(seed, 11)
    lengths = rng.integers(min_len, max_len + 1, size=n)
    doms = rng.integers(0, len(domains), size=n)
    return [
        Document(f"doc{i}", domains[d], random_tokens(rng, int(n_)))
        for i, (n_, d) in enumerate(zip(lengths, doms))
    ]


def corpus_records(target_bytes: int, seed: int, scale: float = 1.0) -> Iterator[str]:
    """NDJSON records of a mixed corpus: books, code repository files, and ShortMix documents.

    Roughly a third of the bytes are books (64K-200K tokens), a third code
    files grouped into repositories, and a third short-mix documents with
    realistic length tails. ``scale`` shrinks all lengths for quick runs.
    """
    rng = _rng(seed, 13)
    written = 0
    i = 0
    short_iter = iter(())
    repo = 0
    while written < target_bytes:
        kind = i % 3
        if kind == 0:
            n = int(rng.integers(65536, 200_000) * scale)
            rec = {"id": f"book{i}", "domain": "books", "tokens": random_tokens(rng, max(n, 1)).tolist()}
            lines = [json.dumps(rec)]
        elif kind == 1:
            files = int(rng.integers(20, 120))
            lines = []
            for f in range(files):
                n = max(1, int(rng.integers(200, 3000) * scale))
                rec = {
                    "id": f"repo{repo}/file{f}",
                    "domain": "code_repos",
                    "repo_key": f"repo{repo}",
                    "tokens": random_tokens(rng, n).tolist(),
                }
                lines.append(json.dumps(rec))
            repo += 1
        else:
            lines = []
            for _ in range(64):
                try:
                    dom, n = next(short_iter)
                except StopIteration:
                    short_iter = iter(shortmix_lengths(4096, int(rng.integers(0, 2**31))))
                    dom, n = next(short_iter)
                n = max(1, int(n * scale))
                rec = {"id": f"{dom}{i}_{len(lines)}", "domain": dom, "tokens": random_tokens(rng, n).tolist()}
                lines.append(json.dumps(rec))
        for line in lines:
            written += len(line) + 1
            yield line
        i += 1


def write_corpus(path: Union[str, os.PathLike], target_bytes: int, seed: int, scale: float = 1.0) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for line in corpus_records(target_bytes, seed, scale):
            fh.write(line)
            fh.write("\n")
            n += 1
    return n
