"""Packing documents into fixed-length training sequences.

Three regimes are supported:

* short data: greedy concatenation into length-L chunks; the document that
  overflows a chunk is truncated and, with ``carry=True``, its tail opens
  the next chunk;
* long data: documents shorter than L are dropped, longer ones truncated to
  exactly L (one document per chunk);
* SFT data: conversations are concatenated up to L, the overflowing one is
  truncated and its remainder thrown away, and only response tokens carry
  loss.

Every sequence records its document boundaries so that attention can be
restricted to tokens of the same document.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import TOKEN_DTYPE, Document, Tokenizer, WhitespaceTokenizer

log = logging.getLogger(__name__)

INSTRUCTION = "instruction"
RESPONSE = "response"
_RESPONSE_ROLES = {"assistant", "response", "gpt", "model"}


@dataclass(frozen=True, eq=False)
class PackedSequence:
    tokens: np.ndarray
    boundaries: Tuple[int, ...]
    segment_domains: Tuple[str, ...]
    origin_ids: Tuple[str, ...]
    # offset of each segment inside its source document; > 0 means a carried tail
    origin_offsets: Tuple[int, ...]

    def __post_init__(self):
        tokens = np.ascontiguousarray(self.tokens, dtype=TOKEN_DTYPE)
        tokens.flags.writeable = False
        object.__setattr__(self, "tokens", tokens)
        b = tuple(int(x) for x in self.boundaries)
        object.__setattr__(self, "boundaries", b)
        n = len(b) - 1
        if n < 1 or b[0] != 0 or b[-1] != tokens.shape[0]:
            raise ValueError(f"boundaries {b[:3]}...{b[-1:]} do not span {tokens.shape[0]} tokens")
        if any(b1 <= b0 for b0, b1 in zip(b, b[1:])):
            raise ValueError("boundaries must be strictly increasing")
        if not (len(self.segment_domains) == len(self.origin_ids) == len(self.origin_offsets) == n):
            raise ValueError("per-segment metadata does not match the number of segments")

    @property
    def length(self) -> int:
        return int(self.tokens.shape[0])

    @property
    def num_segments(self) -> int:
        return len(self.boundaries) - 1

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.diff(np.asarray(self.boundaries, dtype=np.int64))

    @property
    def carried(self) -> Tuple[bool, ...]:
        return tuple(o > 0 for o in self.origin_offsets)

    def segment(self, i: int) -> np.ndarray:
        return self.tokens[self.boundaries[i] : self.boundaries[i + 1]]

    def __len__(self) -> int:
        return self.length

    def __repr__(self) -> str:
        return f"PackedSequence(length={self.length}, segments={self.num_segments})"


def cu_seqlens(seq: PackedSequence) -> np.ndarray:
    """Cumulative segment offsets for variable-length attention kernels."""
    return np.asarray(seq.boundaries, dtype=np.int32)


def segment_ids(offsets: Sequence[int]) -> np.ndarray:
    offsets = np.asarray(offsets, dtype=np.int64)
    return np.repeat(np.arange(len(offsets) - 1), np.diff(offsets))


def attention_mask(offsets: Sequence[int], causal: bool = False) -> np.ndarray:
    """Boolean [L, L] mask: True where query i may attend to key j."""
    seg = segment_ids(offsets)
    mask = seg[:, None] == seg[None, :]
    if causal:
        mask &= np.tri(len(seg), dtype=bool)
    return mask


@dataclass
class PackStats:
    input_documents: int = 0
    input_tokens: int = 0
    emitted_sequences: int = 0
    emitted_tokens: int = 0
    carried_tokens: int = 0
    discarded_tail_tokens: int = 0
    final_partial_tokens: int = 0
    filtered_documents: int = 0
    filtered_tokens: int = 0
    truncated_tokens: int = 0
    rejected: List[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["rejected"] = len(self.rejected)
        return d


class _ChunkBuilder:
    def __init__(self, length: int):
        self.length = length
        self.reset()

    def reset(self):
        self.parts: List[np.ndarray] = []
        self.bounds = [0]
        self.domains: List[str] = []
        self.ids: List[str] = []
        self.offsets: List[int] = []
        self.fill = 0

    @property
    def space(self) -> int:
        return self.length - self.fill

    def add(self, piece: np.ndarray, doc: Document, offset: int):
        self.parts.append(piece)
        self.fill += piece.shape[0]
        self.bounds.append(self.fill)
        self.domains.append(doc.domain)
        self.ids.append(doc.id)
        self.offsets.append(offset)

    def build(self) -> PackedSequence:
        tokens = self.parts[0] if len(self.parts) == 1 else np.concatenate(self.parts)
        seq = PackedSequence(tokens, tuple(self.bounds), tuple(self.domains), tuple(self.ids), tuple(self.offsets))
        self.reset()
        return seq


def pack_short(
    docs: Iterable[Document],
    length: int,
    carry: bool = True,
    separator: Optional[int] = None,
    stats: Optional[PackStats] = None,
) -> Iterator[PackedSequence]:
    """Greedily pack ``docs`` in stream order into sequences of exactly ``length`` tokens.

    With ``carry`` the truncated tail of the last document in a chunk opens
    the next chunk (repeatedly, so a document longer than ``length`` spans
    several chunks). Without it the tail is discarded, except that whole
    ``length``-sized pieces of an over-long document are still emitted. The
    incomplete final chunk is dropped and counted in ``final_partial_tokens``.

    If ``separator`` is given it is appended to each document before packing.
    """
    if length < 1:
        raise ValueError("pack length must be >= 1")
    stats = stats if stats is not None else PackStats()
    chunk = _ChunkBuilder(length)
    sep = None if separator is None else np.array([separator], dtype=TOKEN_DTYPE)

    for doc in docs:
        toks = doc.tokens if sep is None else np.concatenate([doc.tokens, sep])
        n = toks.shape[0]
        stats.input_documents += 1
        stats.input_tokens += n
        pos = 0
        while pos < n:
            take = min(chunk.space, n - pos)
            chunk.add(toks[pos : pos + take], doc, pos)
            if pos > 0:
                stats.carried_tokens += take
            pos += take
            if chunk.space == 0:
                stats.emitted_sequences += 1
                stats.emitted_tokens += length
                yield chunk.build()
                if not carry and pos < n:
                    # only whole pieces of an over-long document survive
                    rest = n - pos
                    keep = (rest // length) * length
                    for start in range(pos, pos + keep, length):
                        chunk.add(toks[start : start + length], doc, start)
                        stats.emitted_sequences += 1
                        stats.emitted_tokens += length
                        yield chunk.build()
                    stats.discarded_tail_tokens += rest - keep
                    break
    stats.final_partial_tokens += chunk.fill
    if chunk.fill:
        log.debug("dropping final partial chunk of %d tokens", chunk.fill)


def filter_long(
    docs: Iterable[Document],
    length: int,
    stats: Optional[PackStats] = None,
) -> Iterator[Document]:
    """Keep documents of at least ``length`` tokens, truncated to exactly ``length``."""
    if length < 1:
        raise ValueError("length must be >= 1")
    stats = stats if stats is not None else PackStats()
    for doc in docs:
        stats.input_documents += 1
        stats.input_tokens += doc.length
        if doc.length < length:
            stats.filtered_documents += 1
            stats.filtered_tokens += doc.length
            continue
        stats.truncated_tokens += doc.length - length
        if doc.length == length:
            yield doc
        else:
            yield Document(doc.id, doc.domain, doc.tokens[:length], doc.repo_key)


def single_document_sequence(doc: Document) -> PackedSequence:
    return PackedSequence(doc.tokens, (0, doc.length), (doc.domain,), (doc.id,), (0,))


def pack_long(
    docs: Iterable[Document],
    length: int,
    stats: Optional[PackStats] = None,
) -> Iterator[PackedSequence]:
    """Filter + truncate, one document per emitted sequence."""
    stats = stats if stats is not None else PackStats()
    for doc in filter_long(docs, length, stats):
        stats.emitted_sequences += 1
        stats.emitted_tokens += length
        yield single_document_sequence(doc)


# --- SFT -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SftExample:
    tokens: np.ndarray
    loss_mask: np.ndarray
    turn_spans: Tuple[Tuple[str, int, int], ...]
    # conversation boundaries when several conversations share one example
    boundaries: Tuple[int, ...] = ()
    origin_ids: Tuple[str, ...] = ()
    kind: str = "sft"

    def __post_init__(self):
        tokens = np.ascontiguousarray(self.tokens, dtype=TOKEN_DTYPE)
        mask = np.ascontiguousarray(self.loss_mask, dtype=bool)
        if tokens.shape != mask.shape:
            raise ValueError("loss_mask must have one entry per token")
        tokens.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "loss_mask", mask)
        spans = tuple((str(r), int(s), int(e)) for r, s, e in self.turn_spans)
        object.__setattr__(self, "turn_spans", spans)
        if not self.boundaries:
            object.__setattr__(self, "boundaries", (0, tokens.shape[0]))
        else:
            object.__setattr__(self, "boundaries", tuple(int(b) for b in self.boundaries))

    @property
    def length(self) -> int:
        return int(self.tokens.shape[0])

    @property
    def trained_tokens(self) -> int:
        return int(self.loss_mask.sum())

    def __len__(self) -> int:
        return self.length

    def to_bytes(self) -> bytes:
        """Canonical byte form, used for replay and determinism checks."""
        head = repr((self.kind, self.turn_spans, self.boundaries, self.origin_ids)).encode()
        return (
            len(head).to_bytes(4, "little")
            + head
            + self.tokens.astype("<u4").tobytes()
            + np.packbits(self.loss_mask).tobytes()
        )


def _turn_role(role: str) -> str:
    return RESPONSE if role.lower() in _RESPONSE_ROLES else INSTRUCTION


def sft_from_turns(
    turns: Sequence[Tuple[str, np.ndarray]],
    conv_id: str = "",
    kind: str = "sft",
) -> SftExample:
    """Concatenate (role, tokens) turns; only response turns are trained on."""
    parts, mask_parts, spans = [], [], []
    pos = 0
    for role, toks in turns:
        toks = np.asarray(toks, dtype=TOKEN_DTYPE)
        r = _turn_role(role)
        spans.append((r, pos, pos + toks.shape[0]))
        parts.append(toks)
        mask_parts.append(np.full(toks.shape[0], r == RESPONSE))
        pos += toks.shape[0]
    if not any(r == RESPONSE for r, _, _ in spans):
        raise ValueError(f"conversation {conv_id!r} has no response turn")
    tokens = np.concatenate(parts) if parts else np.zeros(0, TOKEN_DTYPE)
    mask = np.concatenate(mask_parts) if mask_parts else np.zeros(0, bool)
    return SftExample(tokens, mask, tuple(spans), (), (conv_id,), kind)


def conversation_from_record(rec: dict, tokenizer: Optional[Tokenizer] = None) -> SftExample:
    """Build an unpacked SftExample from ``{id, turns: [{role, text|tokens}]}``."""
    tokenizer = tokenizer or WhitespaceTokenizer()
    turns = []
    for t in rec.get("turns") or rec.get("messages") or []:
        if "tokens" in t:
            toks = np.asarray(t["tokens"], dtype=TOKEN_DTYPE)
        else:
            toks = np.asarray(tokenizer(str(t.get("text", t.get("content", "")))), dtype=TOKEN_DTYPE)
        turns.append((t["role"], toks))
    return sft_from_turns(turns, str(rec.get("id", "")))


def _truncate(ex: SftExample, n: int) -> SftExample:
    spans = tuple((r, s, min(e, n)) for r, s, e in ex.turn_spans if s < n)
    return SftExample(ex.tokens[:n], ex.loss_mask[:n], spans, (), ex.origin_ids, ex.kind)


def _join(examples: List[SftExample]) -> SftExample:
    spans, bounds, ids = [], [0], []
    pos = 0
    for ex in examples:
        spans.extend((r, s + pos, e + pos) for r, s, e in ex.turn_spans)
        pos += ex.length
        bounds.append(pos)
        ids.extend(ex.origin_ids)
    return SftExample(
        np.concatenate([e.tokens for e in examples]),
        np.concatenate([e.loss_mask for e in examples]),
        tuple(spans),
        tuple(bounds),
        tuple(ids),
        examples[0].kind if len({e.kind for e in examples}) == 1 else "mixed",
    )


def pack_sft(
    conversations: Iterable[SftExample],
    length: int,
    stats: Optional[PackStats] = None,
) -> Iterator[SftExample]:
    """Concatenate conversations into examples of at most ``length`` tokens.

    The conversation that would overflow is truncated to fill the example and
    its remainder is dropped (never carried). A truncated piece left with no
    response tokens is dropped entirely. The last, possibly short, example is
    emitted.
    """
    if length < 1:
        raise ValueError("pack length must be >= 1")
    stats = stats if stats is not None else PackStats()
    batch: List[SftExample] = []
    fill = 0

    def flush():
        nonlocal batch, fill
        out = None
        if batch:
            ex = _join(batch)
            if ex.trained_tokens:
                stats.emitted_sequences += 1
                stats.emitted_tokens += ex.length
                out = ex
            else:
                stats.discarded_tail_tokens += ex.length
        batch, fill = [], 0
        return out

    for conv in conversations:
        stats.input_documents += 1
        stats.input_tokens += conv.length
        if not conv.trained_tokens:
            stats.rejected.append(f"{conv.origin_ids}: no response tokens")
            stats.input_tokens -= conv.length
            continue
        space = length - fill
        if conv.length <= space:
            batch.append(conv)
            fill += conv.length
        else:
            piece = _truncate(conv, space)
            stats.discarded_tail_tokens += conv.length - space
            if piece.trained_tokens:
                batch.append(piece)
                fill += space
            else:
                stats.discarded_tail_tokens += piece.length
        if fill == length:
            ex = flush()
            if ex is not None:
                yield ex
    ex = flush()
    if ex is not None:
        yield ex
