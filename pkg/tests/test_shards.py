import json

import numpy as np
import pytest

from conftest import fake_pool, make_doc
from longctx import shards
from longctx.corpus import Document
from longctx.packer import pack_sft, pack_short, sft_from_turns


def test_document_roundtrip(tmp_path):
    docs = [make_doc("a", 5), Document("b", "code", [1, 2, 2**31 - 2], "repo"), make_doc("ünï", 1, "wiki")]
    p = tmp_path / "x.docs"
    counts = shards.write_documents(p, docs)
    assert counts == {"books": 1, "code": 1, "wiki": 1}
    back = list(shards.read_documents(p))
    assert [(d.id, d.domain, d.repo_key) for d in back] == [(d.id, d.domain, d.repo_key) for d in docs]
    assert all(np.array_equal(a.tokens, b.tokens) for a, b in zip(docs, back))
    assert shards.shard_kind(p) == "documents"


def test_sequence_roundtrip(tmp_path, docs_factory):
    seqs = list(pack_short(docs_factory([5, 9, 3, 20, 7]), 8))
    p = tmp_path / "x.seqs"
    shards.write_sequences(p, seqs)
    back = list(shards.read_sequences(p))
    assert len(back) == len(seqs)
    for a, b in zip(seqs, back):
        assert np.array_equal(a.tokens, b.tokens)
        assert (a.boundaries, a.segment_domains, a.origin_ids, a.origin_offsets) == (
            b.boundaries, b.segment_domains, b.origin_ids, b.origin_offsets)
    assert shards.read_sequence_header(p) == {"length": 8, "count": len(seqs)}


def test_mixed_length_header(tmp_path):
    p = tmp_path / "m.seqs"
    shards.write_sequences(p, fake_pool("a", 2, 8) + fake_pool("b", 1, 16))
    assert shards.read_sequence_header(p)["length"] == 0


def test_sft_roundtrip_bytes(tmp_path):
    convs = [sft_from_turns([("user", np.arange(1, 6)), ("assistant", np.arange(6, 9))], f"c{i}") for i in range(4)]
    exs = list(pack_sft(convs, 20))
    p = tmp_path / "x.sft"
    shards.write_sft(p, exs)
    back = list(shards.read_sft(p))
    assert [e.to_bytes() for e in back] == [e.to_bytes() for e in exs]


def test_wrong_magic_rejected(tmp_path):
    p = tmp_path / "bad"
    p.write_bytes(b"NOTASHARD" * 4)
    assert shards.shard_kind(p) == "unknown"
    for reader in (shards.read_documents, shards.read_sequences, shards.read_sft):
        with pytest.raises(ValueError):
            list(reader(p))


def test_truncated_shard_is_an_error(tmp_path):
    p = tmp_path / "t.docs"
    shards.write_documents(p, [make_doc("a", 100)])
    p.write_bytes(p.read_bytes()[:-10])
    with pytest.raises(ValueError):
        list(shards.read_documents(p))


def test_manifest_verify(tmp_path):
    p = tmp_path / "x.docs"
    shards.write_documents(p, [make_doc("a", 3)])
    m = shards.write_manifest(p, domain="books", documents=1)
    data = json.loads(m.read_text())
    assert data["shard"] == "x.docs" and data["documents"] == 1
    assert shards.verify_manifest(p)
    shards.write_documents(p, [make_doc("a", 4)])
    assert not shards.verify_manifest(p)


def test_writes_are_deterministic(tmp_path, docs_factory):
    seqs = list(pack_short(docs_factory([50, 60, 70]), 32))
    a, b = tmp_path / "a.seqs", tmp_path / "b.seqs"
    shards.write_sequences(a, seqs)
    shards.write_sequences(b, seqs)
    assert shards.file_digest(a) == shards.file_digest(b)


def test_list_shards(tmp_path):
    for name in ["b.seqs", "a.docs", "notes.txt"]:
        (tmp_path / name).write_bytes(b"")
    assert [p.name for p in shards.list_shards([tmp_path])] == ["a.docs", "b.seqs"]
