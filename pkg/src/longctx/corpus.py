"""Document ingestion, repository concatenation and length statistics."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Union

import numpy as np

log = logging.getLogger(__name__)

TOKEN_DTYPE = np.int32
CODE_REPOS = "code_repos"
DEFAULT_SEPARATOR = 0
LONG_THRESHOLD = 65536


@dataclass(frozen=True, eq=False)
class Document:
    id: str
    domain: str
    tokens: np.ndarray
    repo_key: Optional[str] = None

    def __post_init__(self):
        arr = np.ascontiguousarray(self.tokens, dtype=TOKEN_DTYPE)
        if arr.ndim != 1:
            raise ValueError(f"document {self.id!r}: tokens must be 1-d")
        if arr.size == 0:
            raise ValueError(f"document {self.id!r} has no tokens")
        if arr.size and int(arr.min()) < 0:
            raise ValueError(f"document {self.id!r} has negative token ids")
        arr.flags.writeable = False
        object.__setattr__(self, "tokens", arr)

    @property
    def length(self) -> int:
        return int(self.tokens.shape[0])

    def __len__(self) -> int:
        return self.length

    def __repr__(self) -> str:
        return f"Document(id={self.id!r}, domain={self.domain!r}, length={self.length})"


class WhitespaceTokenizer:
    """Deterministic fallback tokenizer.

    Splits on whitespace and maps each word to a stable hashed id in
    ``[1, 2**31 - 1)``; id 0 stays free for the separator. ``decode`` only
    knows words this instance has encoded.
    """

    def __init__(self):
        self._words: Dict[int, str] = {}

    @staticmethod
    @lru_cache(maxsize=1 << 18)
    def word_id(word: str) -> int:
        h = hashlib.blake2b(word.encode("utf-8"), digest_size=8).digest()
        return 1 + int.from_bytes(h, "little") % (2**31 - 2)

    def encode(self, text: str) -> np.ndarray:
        words = text.split()
        ids = [self.word_id(w) for w in words]
        for i, w in zip(ids, words):
            self._words.setdefault(i, w)
        return np.asarray(ids, dtype=TOKEN_DTYPE)

    def decode(self, ids: Iterable[int]) -> str:
        return " ".join(self._words[int(i)] for i in ids)

    def count(self, text: str) -> int:
        return len(text.split())

    __call__ = encode


Tokenizer = Callable[[str], Sequence[int]]


@dataclass
class IngestStats:
    records: int = 0
    documents: int = 0
    tokens: int = 0
    dropped_empty: int = 0
    errors: List[str] = field(default_factory=list)


def _record_lines(source) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        # unreadable source is fatal: let OSError propagate
        with open(source, "r", encoding="utf-8") as fh:
            yield from fh
    else:
        yield from source


def ingest(
    source: Union[str, Path, Iterable[str]],
    domain: Optional[str] = None,
    tokenizer: Optional[Tokenizer] = None,
    stats: Optional[IngestStats] = None,
) -> Iterator[Document]:
    """Yield Documents from newline-delimited JSON records, in input order.

    Each record carries ``tokens`` (id list) or ``text``. ``domain``
    overrides the record's own domain field. Malformed records are logged
    into ``stats.errors`` with their line number and skipped; zero-token
    records are counted in ``stats.dropped_empty``.
    """
    tokenizer = tokenizer or WhitespaceTokenizer()
    stats = stats if stats is not None else IngestStats()
    for lineno, line in enumerate(_record_lines(source), start=1):
        if not line.strip():
            continue
        stats.records += 1
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict):
                raise ValueError("record is not an object")
            if "tokens" in rec:
                tokens = np.asarray(rec["tokens"], dtype=np.int64)
                if tokens.ndim != 1 or (tokens.size and tokens.min() < 0):
                    raise ValueError("tokens must be a flat list of non-negative ids")
            elif "text" in rec:
                tokens = np.asarray(tokenizer(str(rec["text"])), dtype=np.int64)
            else:
                raise ValueError("record has neither 'tokens' nor 'text'")
            dom = domain or rec.get("domain")
            if not dom:
                raise ValueError("no domain given")
            doc_id = str(rec.get("id", f"line{lineno}"))
        except (ValueError, TypeError) as exc:
            msg = f"line {lineno}: {exc}"
            log.warning("skipping malformed record: %s", msg)
            stats.errors.append(msg)
            continue
        if tokens.size == 0:
            stats.dropped_empty += 1
            continue
        doc = Document(doc_id, dom, tokens, rec.get("repo_key"))
        stats.documents += 1
        stats.tokens += doc.length
        yield doc


def concat_repo(files: Sequence[Document], separator: int = DEFAULT_SEPARATOR) -> Document:
    """Join all files of one repository, in the given order, into one document."""
    if not files:
        raise ValueError("concat_repo needs at least one file")
    keys = {f.repo_key for f in files}
    if len(keys) != 1:
        raise ValueError(f"files span several repositories: {sorted(map(str, keys))}")
    (key,) = keys
    parts: List[np.ndarray] = []
    sep = np.array([separator], dtype=TOKEN_DTYPE)
    for i, f in enumerate(files):
        if i:
            parts.append(sep)
        parts.append(f.tokens)
    return Document(f"repo:{key}", CODE_REPOS, np.concatenate(parts), key)


def group_repos(docs: Iterable[Document], separator: int = DEFAULT_SEPARATOR) -> Iterator[Document]:
    """Concatenate documents that carry a repo_key; pass the rest through.

    Repositories are emitted in order of first appearance, after the input is
    exhausted; files keep their ingestion order inside a repository.
    """
    repos: Dict[str, List[Document]] = {}
    for d in docs:
        if d.repo_key is None:
            yield d
        else:
            repos.setdefault(d.repo_key, []).append(d)
    for files in repos.values():
        yield concat_repo(files, separator)


@dataclass
class DomainCensus:
    documents: int = 0
    total_tokens: int = 0
    long_documents: int = 0
    long_tokens: int = 0
    exceeding: List[int] = field(default_factory=list)

    def __add__(self, other: "DomainCensus") -> "DomainCensus":
        if len(self.exceeding) != len(other.exceeding):
            raise ValueError("cannot merge censuses with different thresholds")
        return DomainCensus(
            self.documents + other.documents,
            self.total_tokens + other.total_tokens,
            self.long_documents + other.long_documents,
            self.long_tokens + other.long_tokens,
            [a + b for a, b in zip(self.exceeding, other.exceeding)],
        )


@dataclass
class LengthCensus:
    """Per-domain token totals, long-document tokens and length-tail fractions.

    ``exceeding[i]`` counts documents strictly longer than ``thresholds[i]``;
    long documents are those with length >= ``long_threshold``.
    """

    thresholds: List[int]
    long_threshold: int = LONG_THRESHOLD
    domains: Dict[str, DomainCensus] = field(default_factory=dict)

    def add(self, doc: Document) -> None:
        c = self.domains.get(doc.domain)
        if c is None:
            c = self.domains[doc.domain] = DomainCensus(exceeding=[0] * len(self.thresholds))
        n = doc.length
        c.documents += 1
        c.total_tokens += n
        if n >= self.long_threshold:
            c.long_documents += 1
            c.long_tokens += n
        for i, t in enumerate(self.thresholds):
            if n > t:
                c.exceeding[i] += 1
            else:
                break

    def fractions(self, domain: str) -> List[float]:
        c = self.domains.get(domain)
        if c is None or c.documents == 0:
            return [0.0] * len(self.thresholds)
        return [e / c.documents for e in c.exceeding]

    def __add__(self, other: "LengthCensus") -> "LengthCensus":
        if self.thresholds != other.thresholds or self.long_threshold != other.long_threshold:
            raise ValueError("cannot merge censuses with different thresholds")
        merged = LengthCensus(list(self.thresholds), self.long_threshold)
        for name in sorted(set(self.domains) | set(other.domains)):
            empty = DomainCensus(exceeding=[0] * len(self.thresholds))
            merged.domains[name] = self.domains.get(name, empty) + other.domains.get(name, empty)
        return merged

    def __eq__(self, other) -> bool:
        if not isinstance(other, LengthCensus):
            return NotImplemented
        return (
            self.thresholds == other.thresholds
            and self.long_threshold == other.long_threshold
            and self.domains == other.domains
        )

    def to_dict(self) -> dict:
        out = {"thresholds": self.thresholds, "long_threshold": self.long_threshold, "domains": {}}
        for name in sorted(self.domains):
            c = self.domains[name]
            out["domains"][name] = {
                "documents": c.documents,
                "total_tokens": c.total_tokens,
                "long_documents": c.long_documents,
                "long_tokens": c.long_tokens,
                "fraction_exceeding": dict(zip(map(str, self.thresholds), self.fractions(name))),
            }
        return out


def census(
    docs: Iterable[Document],
    thresholds: Sequence[int] = (4096, 8192, 16384, 32768),
    long_threshold: int = LONG_THRESHOLD,
) -> LengthCensus:
    thresholds = list(thresholds)
    if thresholds != sorted(thresholds):
        raise ValueError("thresholds must be sorted ascending")
    result = LengthCensus(thresholds, long_threshold)
    for d in docs:
        result.add(d)
    return result
