"""Binary shard formats and manifests.

All integers are little-endian. Token ids are stored as uint32.

Document shard (``.docs``)::

    magic  b"LCDOCS01"
    u64    document count
    per document:
        u16 len + utf-8 id
        u16 len + utf-8 domain
        u16 len + utf-8 repo_key   (len 0xFFFF means no key)
        u64 n_tokens
        u32 tokens[n_tokens]

Packed-sequence shard (``.seqs``)::

    magic  b"LCSEQS01"
    u64    L (pack length, 0 if sequences differ in length)
    u64    sequence count
    u64    byte offset of the domain table
    per sequence:
        u64 n_tokens
        u32 n_segments
        u32 tokens[n_tokens]
        u64 boundaries[n_segments + 1]
        u16 domain_index[n_segments]
        per segment: u16 len + utf-8 origin id, u64 origin offset
    domain table: u32 count, then u16 len + utf-8 name per domain

SFT shard (``.sft``)::

    magic  b"LCSFT001"
    u64    example count
    per example:
        u16 len + utf-8 kind
        u64 n_tokens
        u32 tokens[n_tokens]
        u8  loss_mask[n_tokens]
        u32 n_spans, per span: u8 role (0 instruction, 1 response), u64 start, u64 end
        u32 n_bounds, u64 boundaries[n_bounds]
        u32 n_ids, per id: u16 len + utf-8 origin id

Every shard gets a JSON manifest next to it (``<shard>.manifest.json``).
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, Iterator, List, Optional, Union

import numpy as np

from .corpus import Document
from .packer import INSTRUCTION, RESPONSE, PackedSequence, SftExample

DOC_MAGIC = b"LCDOCS01"
SEQ_MAGIC = b"LCSEQS01"
SFT_MAGIC = b"LCSFT001"
_NO_KEY = 0xFFFF

PathLike = Union[str, os.PathLike]


def _write_str(fh: BinaryIO, s: Optional[str]) -> None:
    if s is None:
        fh.write(struct.pack("<H", _NO_KEY))
        return
    b = s.encode("utf-8")
    if len(b) >= _NO_KEY:
        raise ValueError(f"string too long for shard format: {s[:40]!r}...")
    fh.write(struct.pack("<H", len(b)))
    fh.write(b)


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    b = fh.read(n)
    if len(b) != n:
        raise ValueError("truncated shard")
    return b


def _read_str(fh: BinaryIO) -> Optional[str]:
    (n,) = struct.unpack("<H", _read_exact(fh, 2))
    if n == _NO_KEY:
        return None
    return _read_exact(fh, n).decode("utf-8")


def _read_array(fh: BinaryIO, dtype: str, n: int) -> np.ndarray:
    itemsize = np.dtype(dtype).itemsize
    return np.frombuffer(_read_exact(fh, itemsize * n), dtype=dtype)


def file_digest(path: PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def manifest_path(shard: PathLike) -> Path:
    return Path(str(shard) + ".manifest.json")


def write_manifest(shard: PathLike, **fields) -> Path:
    data = {"shard": Path(shard).name, "sha256": file_digest(shard), **fields}
    out = manifest_path(shard)
    out.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return out


def read_manifest(shard: PathLike) -> dict:
    return json.loads(manifest_path(shard).read_text())


def verify_manifest(shard: PathLike) -> bool:
    return read_manifest(shard)["sha256"] == file_digest(shard)


# --- documents -------------------------------------------------------------


def write_documents(path: PathLike, docs: Iterable[Document]) -> Dict[str, int]:
    """Write documents; returns the per-domain document counts."""
    counts: Dict[str, int] = {}
    n = 0
    with open(path, "wb") as fh:
        fh.write(DOC_MAGIC)
        fh.write(struct.pack("<Q", 0))
        for d in docs:
            _write_str(fh, d.id)
            _write_str(fh, d.domain)
            _write_str(fh, d.repo_key)
            fh.write(struct.pack("<Q", d.length))
            fh.write(d.tokens.astype("<u4").tobytes())
            counts[d.domain] = counts.get(d.domain, 0) + 1
            n += 1
        fh.seek(len(DOC_MAGIC))
        fh.write(struct.pack("<Q", n))
    return counts


def read_documents(path: PathLike) -> Iterator[Document]:
    with open(path, "rb") as fh:
        if _read_exact(fh, 8) != DOC_MAGIC:
            raise ValueError(f"{path}: not a document shard")
        (count,) = struct.unpack("<Q", _read_exact(fh, 8))
        for _ in range(count):
            doc_id = _read_str(fh)
            domain = _read_str(fh)
            key = _read_str(fh)
            (n,) = struct.unpack("<Q", _read_exact(fh, 8))
            tokens = _read_array(fh, "<u4", n).astype(np.int32)
            yield Document(doc_id, domain, tokens, key)


# --- packed sequences ------------------------------------------------------


def write_sequences(path: PathLike, seqs: Iterable[PackedSequence]) -> Dict[str, int]:
    """Write packed sequences; returns per-domain segment counts."""
    domains: Dict[str, int] = {}
    counts: Dict[str, int] = {}
    n = 0
    length: Optional[int] = None
    with open(path, "wb") as fh:
        fh.write(SEQ_MAGIC)
        fh.write(struct.pack("<QQQ", 0, 0, 0))
        for s in seqs:
            if length is None:
                length = s.length
            elif length != s.length:
                length = 0
            fh.write(struct.pack("<QI", s.length, s.num_segments))
            fh.write(s.tokens.astype("<u4").tobytes())
            fh.write(np.asarray(s.boundaries, dtype="<u8").tobytes())
            idx = [domains.setdefault(d, len(domains)) for d in s.segment_domains]
            fh.write(np.asarray(idx, dtype="<u2").tobytes())
            for oid, off in zip(s.origin_ids, s.origin_offsets):
                _write_str(fh, oid)
                fh.write(struct.pack("<Q", off))
            for d in s.segment_domains:
                counts[d] = counts.get(d, 0) + 1
            n += 1
        table_at = fh.tell()
        fh.write(struct.pack("<I", len(domains)))
        for name in domains:
            _write_str(fh, name)
        fh.seek(len(SEQ_MAGIC))
        fh.write(struct.pack("<QQQ", length or 0, n, table_at))
    return counts


def read_sequences(path: PathLike) -> Iterator[PackedSequence]:
    with open(path, "rb") as fh:
        if _read_exact(fh, 8) != SEQ_MAGIC:
            raise ValueError(f"{path}: not a sequence shard")
        _, count, table_at = struct.unpack("<QQQ", _read_exact(fh, 24))
        start = fh.tell()
        fh.seek(table_at)
        (nd,) = struct.unpack("<I", _read_exact(fh, 4))
        names = [_read_str(fh) for _ in range(nd)]
        fh.seek(start)
        for _ in range(count):
            n, k = struct.unpack("<QI", _read_exact(fh, 12))
            tokens = _read_array(fh, "<u4", n).astype(np.int32)
            bounds = tuple(int(b) for b in _read_array(fh, "<u8", k + 1))
            doms = tuple(names[i] for i in _read_array(fh, "<u2", k))
            ids, offs = [], []
            for _ in range(k):
                ids.append(_read_str(fh))
                offs.append(struct.unpack("<Q", _read_exact(fh, 8))[0])
            yield PackedSequence(tokens, bounds, doms, tuple(ids), tuple(offs))


def read_sequence_header(path: PathLike) -> dict:
    with open(path, "rb") as fh:
        if _read_exact(fh, 8) != SEQ_MAGIC:
            raise ValueError(f"{path}: not a sequence shard")
        length, count, _ = struct.unpack("<QQQ", _read_exact(fh, 24))
    return {"length": length, "count": count}


# --- SFT examples ----------------------------------------------------------


def write_sft(path: PathLike, examples: Iterable[SftExample]) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    n = 0
    with open(path, "wb") as fh:
        fh.write(SFT_MAGIC)
        fh.write(struct.pack("<Q", 0))
        for ex in examples:
            _write_str(fh, ex.kind)
            fh.write(struct.pack("<Q", ex.length))
            fh.write(ex.tokens.astype("<u4").tobytes())
            fh.write(ex.loss_mask.astype("u1").tobytes())
            fh.write(struct.pack("<I", len(ex.turn_spans)))
            for role, s, e in ex.turn_spans:
                fh.write(struct.pack("<BQQ", 1 if role == RESPONSE else 0, s, e))
            fh.write(struct.pack("<I", len(ex.boundaries)))
            fh.write(np.asarray(ex.boundaries, dtype="<u8").tobytes())
            fh.write(struct.pack("<I", len(ex.origin_ids)))
            for oid in ex.origin_ids:
                _write_str(fh, oid)
            counts[ex.kind] = counts.get(ex.kind, 0) + 1
            n += 1
        fh.seek(len(SFT_MAGIC))
        fh.write(struct.pack("<Q", n))
    return counts


def read_sft(path: PathLike) -> Iterator[SftExample]:
    with open(path, "rb") as fh:
        if _read_exact(fh, 8) != SFT_MAGIC:
            raise ValueError(f"{path}: not an SFT shard")
        (count,) = struct.unpack("<Q", _read_exact(fh, 8))
        for _ in range(count):
            kind = _read_str(fh)
            (n,) = struct.unpack("<Q", _read_exact(fh, 8))
            tokens = _read_array(fh, "<u4", n).astype(np.int32)
            mask = _read_array(fh, "u1", n).astype(bool)
            (ns,) = struct.unpack("<I", _read_exact(fh, 4))
            spans = []
            for _ in range(ns):
                r, s, e = struct.unpack("<BQQ", _read_exact(fh, 17))
                spans.append((RESPONSE if r else INSTRUCTION, s, e))
            (nb,) = struct.unpack("<I", _read_exact(fh, 4))
            bounds = tuple(int(b) for b in _read_array(fh, "<u8", nb))
            (ni,) = struct.unpack("<I", _read_exact(fh, 4))
            ids = tuple(_read_str(fh) for _ in range(ni))
            yield SftExample(tokens, mask, tuple(spans), bounds, ids, kind)


def shard_kind(path: PathLike) -> str:
    with open(path, "rb") as fh:
        magic = fh.read(8)
    return {DOC_MAGIC: "documents", SEQ_MAGIC: "sequences", SFT_MAGIC: "sft"}.get(magic, "unknown")


def list_shards(paths: Iterable[PathLike]) -> List[Path]:
    """Expand directories into the shard files they contain, sorted by name."""
    out: List[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(q for q in p.iterdir() if q.suffix in {".docs", ".seqs", ".sft"}))
        else:
            out.append(p)
    return out
