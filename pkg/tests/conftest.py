import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from longctx.corpus import Document

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=300, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

K = 1024


def make_doc(doc_id, n, domain="books", start=1, repo_key=None):
    """Document whose token at offset i is ``start + i`` (handy for slice checks)."""
    return Document(str(doc_id), domain, np.arange(start, start + n), repo_key)


@pytest.fixture
def docs_factory():
    def make(lengths, domain="books"):
        out, start = [], 1
        for i, n in enumerate(lengths):
            out.append(make_doc(f"d{i}", n, domain, start))
            start += n
        return out

    return make


def fake_pool(domain, n, length, segments=1, tag=None):
    """``n`` packed sequences of ``length`` tokens split into equal segments, unique origins."""
    from longctx.packer import PackedSequence

    tokens = np.zeros(length, dtype=np.int32)
    step = length // segments
    bounds = tuple(range(0, step * segments, step)) + (length,)
    tag = tag or f"{domain}@{length}"
    return [
        PackedSequence(tokens, bounds, (domain,) * segments,
                       tuple(f"{tag}/{i}/{j}" for j in range(segments)), (0,) * segments)
        for i in range(n)
    ]


def pools_for(spec, curriculum, n=64, length=None):
    """One fake pool per (domain, length class) leaf the spec draws from."""
    from longctx.mixer import leaf_targets

    L = length or curriculum.seq_len
    return {key: fake_pool(key[0], n, L, tag=f"{key[0]}@{key[1]}") for key in leaf_targets(spec, curriculum)}
