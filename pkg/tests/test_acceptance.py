"""Acceptance criteria. Each test prints one PASS/FAIL line, then asserts it."""

import itertools
import math
import time
from collections import Counter

import numpy as np
import pytest

from conftest import fake_pool, pools_for
from longctx import mixer, scheduler, shards
from longctx.corpus import Document, WhitespaceTokenizer
from longctx.evalgen import gen_icl, gen_kv, lookup
from longctx.packer import RESPONSE, PackedSequence, PackStats, attention_mask, cu_seqlens, pack_short
from longctx.pipeline import run_pipeline
from longctx.synthetic import random_documents, write_corpus
from longctx.synthgen import (
    ReplayClient,
    RequestLog,
    StubClient,
    SynthBuilder,
    SynthConfig,
    SynthMixSpec,
    SynthMixStats,
    mix_synth,
)
from longctx.trainmath import LossShard, RopeConfig, recipe_base, sequence_avg, suggested_base, token_avg

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(n, title, ok, detail=""):
        with capsys.disabled():
            print(f"\ncriterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        return ok

    return emit


def test_c01_rope_constants(report):
    t0 = time.perf_counter()
    b1 = suggested_base(RopeConfig(5e5, 8192, 65536, 128))
    b2 = suggested_base(RopeConfig(recipe_base(1), 65536, 524288, 128))
    ms = (time.perf_counter() - t0) * 1e3
    e1, e2 = abs(b1 / 4.07e6 - 1), abs(b2 / 6.58e7 - 1)
    ok = e1 <= 0.02 and e2 <= 0.03 and ms < 100
    assert report(1, "RoPE constants", ok,
                  f"8K->64K {b1:.4g} ({e1:.2%} off 4.07e6), 64K->512K {b2:.4g} ({e2:.2%} off 6.58e7), {ms:.2f} ms")


def check_provenance(seq: PackedSequence, by_id, covered):
    for i, (oid, off) in enumerate(zip(seq.origin_ids, seq.origin_offsets)):
        seg = seq.segment(i)
        if not np.array_equal(seg, by_id[oid].tokens[off : off + len(seg)]):
            return False
        covered.setdefault(oid, []).append((off, off + len(seg)))
    return True


def test_c02_packing_conservation(report):
    docs = random_documents(1000, seed=2024, min_len=1, max_len=200_000,
                            domains=("books", "code_repos", "fineweb", "arxiv"))
    by_id = {d.id: d for d in docs}
    L = 65536
    t0 = time.perf_counter()
    stats = PackStats()
    covered: dict = {}
    sound = True
    n = 0
    for seq in pack_short(docs, L, carry=True, stats=stats):
        n += 1
        sound &= seq.length == L and bool(np.all(seq.segment_lengths > 0))
        sound &= check_provenance(seq, by_id, covered)
    # every (doc, offset) emitted exactly once, as a prefix of the doc stream
    stream_len = stats.input_tokens - stats.final_partial_tokens
    seen = 0
    exact = True
    for d in docs:
        spans = sorted(covered.get(d.id, []))
        pos = 0
        for a, b in spans:
            exact &= a == pos
            pos = b
        want = min(d.length, max(0, stream_len - seen))
        exact &= pos == want
        seen += d.length
    conserved = stats.input_tokens == stats.emitted_tokens + stats.final_partial_tokens + stats.discarded_tail_tokens
    conserved &= stats.discarded_tail_tokens == 0 and stats.emitted_tokens == n * L
    secs = time.perf_counter() - t0
    ok = sound and exact and conserved and secs < 10
    assert report(2, "packing conservation", ok,
                  f"{stats.input_tokens} tokens -> {n} seqs + {stats.final_partial_tokens} pending, "
                  f"provenance exact={exact}, {secs:.2f} s")


def test_c03_mask_oracle(report):
    rng = np.random.default_rng(3)
    seqs = []
    while len(seqs) < 500:
        L = int(rng.integers(1, 65))
        lengths = rng.integers(1, 2 * L + 1, size=int(rng.integers(1, 12)))
        docs = [Document(f"d{i}", "x", np.ones(n, dtype=np.int32)) for i, n in enumerate(lengths)]
        seqs.extend(pack_short(docs, L, carry=bool(rng.integers(0, 2))))
    seqs = seqs[:500]
    match = 0
    for s in seqs:
        cu = cu_seqlens(s)
        owner = np.repeat(np.arange(len(cu) - 1), np.diff(cu))
        brute = np.array([[owner[i] == owner[j] for j in range(s.length)] for i in range(s.length)])
        match += bool(np.array_equal(attention_mask(cu), brute))
    ok = match == 500
    assert report(3, "mask oracle equivalence", ok, f"{match}/500 sequences match")


def test_c04_mixture_convergence(report):
    spec, cur = mixer.load_preset("stage1")
    pools = pools_for(spec, cur, n=32)
    targets = spec.target_fractions()
    good = 0
    worst = 0.0
    for seed in range(100):
        spec.seed = seed
        stats = mixer.MixStats()
        for _ in mixer.sample_stream(spec, cur, pools, 10 * 2**20, stats=stats):
            pass
        N = stats.tokens
        f = stats.fractions()
        ratios = [abs(f.get(k, 0.0) - w) / mixer.convergence_bound(w, cur.seq_len, N) for k, w in targets.items()]
        worst = max(worst, max(ratios))
        good += all(r <= 1.0 for r in ratios)

    spec2, cur2 = mixer.load_preset("stage2")
    spec2.seed = 7
    pools2 = pools_for(spec2, cur2, n=32)
    stats2 = mixer.MixStats()
    for _ in mixer.sample_stream(spec2, cur2, pools2, 16 * 2**30, stats=stats2):
        pass
    code = stats2.leaf_tokens[("code_repos", 524288)] + stats2.leaf_tokens[("code_repos", 65536)]
    split = stats2.leaf_tokens[("code_repos", 524288)] / code
    ok = good >= 99 and abs(split - 0.5) <= 0.025
    assert report(4, "mixture convergence", ok,
                  f"{good}/100 seeds within bound (worst {worst:.2f} of bound); "
                  f"stage-2 code 512K share {split:.3f}")


def random_workload(rng, D, A, L=4096):
    tokens = np.zeros(L, dtype=np.int32)
    out = []
    for _ in range(D * A):
        k = int(rng.integers(1, 33))
        cuts = np.sort(rng.choice(np.arange(1, L), size=k - 1, replace=False)) if k > 1 else np.array([], int)
        b = (0, *cuts.tolist(), L)
        out.append(PackedSequence(tokens, b, ("x",) * k, ("o",) * k, (0,) * k))
    return out


_PERMS = {}


def brute_force_optimum(costs, D, A):
    n = D * A
    if n not in _PERMS:
        _PERMS[n] = np.array(list(itertools.permutations(range(n))))
    grid = np.asarray(costs)[_PERMS[n]].reshape(-1, A, D)
    return float(grid.max(axis=2).sum(axis=1).min())


def workloads(n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        D = int(rng.choice([2, 4, 8]))
        A = int(rng.choice([1, 2, 4]))
        yield D, A, random_workload(rng, D, A)


def test_c05_scheduler(report):
    dominated = 0
    small = within = 0
    worst_gap = 0.0
    for D, A, mbs in workloads(1000, 5):
        s = scheduler.makespan(scheduler.reorder(mbs, D, A))
        u = scheduler.makespan(scheduler.manifest_order(mbs, D, A))
        dominated += s <= u
        if D * A <= 8:
            small += 1
            opt = brute_force_optimum([scheduler.cost(m) for m in mbs], D, A)
            gap = s / opt - 1
            worst_gap = max(worst_gap, gap)
            within += gap <= 0.25
    ex_s = scheduler.makespan(scheduler.reorder([100, 1, 100, 1], 2, 2))
    ex_u = scheduler.makespan(scheduler.manifest_order([100, 1, 100, 1], 2, 2))
    ok = dominated == 1000 and within >= 0.9 * small and (ex_s, ex_u) == (101, 200)
    assert report(5, "scheduler dominance and oracle gap", ok,
                  f"sorted<=manifest on {dominated}/1000; {within}/{small} small instances within 25% "
                  f"(worst gap {worst_gap:.2%}); example {ex_s:g} vs {ex_u:g}")


def test_c06_gradient_equivalence(report):
    same = 0
    for D, A, mbs in workloads(1000, 6):
        plan = scheduler.reorder(mbs, D, A)
        rows = scheduler.step_minibatches(plan, mbs)
        same += Counter(map(id, (m for r in rows for m in r))) == Counter(map(id, mbs))
    ok = same == 1000
    assert report(6, "gradient-equivalence property", ok, f"{same}/1000 steps keep their minibatch multiset")


def test_c07_token_avg(report):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(10_000):
        k = int(rng.integers(1, 17))
        per_token = [rng.exponential(2.5, size=int(rng.integers(0, 200))) for _ in range(k)]
        if not any(len(t) for t in per_token):
            per_token[0] = rng.exponential(2.5, size=1)
        shards_ = [LossShard(math.fsum(t), len(t)) for t in per_token]
        flat = np.concatenate(per_token)
        oracle = math.fsum(flat) / flat.size
        worst = max(worst, abs(token_avg(shards_) - oracle) / oracle)
    ex = [LossShard(10, 5), LossShard(6, 1)]
    exact = token_avg(ex) == 16 / 6 and sequence_avg(ex) == 4.0
    ok = worst <= 1e-9 and exact
    assert report(7, "token-averaged loss", ok,
                  f"max rel err {worst:.1e} over 10000 sets; example {token_avg(ex):.3f} vs {sequence_avg(ex):.1f}")


def test_c08_synthetic_replay(report, tmp_path):
    tok = WhitespaceTokenizer()
    rng = np.random.default_rng(8)
    docs = []
    for i in range(50):
        words = " ".join(f"w{x}" for x in rng.integers(0, 3000, size=int(rng.integers(240, 320))))
        docs.append(Document(f"book{i}", "books", tok.encode(words)))
    kinds = ["qa"] * 400 + ["rag"] * 300 + ["summ"] * 300
    jobs = [(k, docs[j % 50], j // 50) for j, k in enumerate(kinds)]
    # compact examples keep the 1M-token mix well above the binomial noise floor
    cfg = SynthConfig(chunk_len=32, rag_chunks=4, summary_window=64, summary_words=12)
    stub = StubClient(answer_words=8, summary_words=12)
    log_path = tmp_path / "requests.ndjson"
    first = SynthBuilder(stub, RequestLog(log_path), tok, cfg).build_many(jobs)
    replayed = SynthBuilder(ReplayClient(RequestLog(log_path)), None, tok, cfg).build_many(jobs)
    identical = len(first.examples) == 1000 and [e.to_bytes() for e in first.examples] == [
        e.to_bytes() for e in replayed.examples]

    masks_ok = 0
    for e in first.examples:
        in_resp = np.zeros(e.length, dtype=bool)
        for role, s, t in e.turn_spans:
            if role == RESPONSE:
                in_resp[s:t] = True
        masks_ok += bool(np.array_equal(e.loss_mask, in_resp) and e.loss_mask.any())

    pools = {k: [e for e in first.examples if e.kind == k] for k in ("qa", "rag", "summ")}
    stats = SynthMixStats()
    for _ in mix_synth(SynthMixSpec(), pools, 2**20, seed=8, stats=stats):
        pass
    frac = {k: stats.kind_tokens.get(k, 0) / stats.tokens for k in pools}
    mix_ok = all(abs(frac[k] - w) <= 0.03 for k, w in (("qa", .4), ("rag", .3), ("summ", .3)))
    ok = identical and masks_ok == 1000 and mix_ok
    mean_len = np.mean([e.length for e in first.examples])
    assert report(8, "synthetic assembly replay", ok,
                  f"replay identical={identical}, masks {masks_ok}/1000, mix "
                  + " ".join(f"{k}={v:.3f}" for k, v in frac.items()) + f" (mean example {mean_len:.0f} tokens)")


def test_c09_eval_generators(report):
    kv_ok = sum(1 for s in range(1000) if (lambda r: r[0] == r[1])(lookup(gen_kv(64, seed=s).to_json())))
    rng = np.random.default_rng(9)
    icl_ok = 0
    for s in range(1000):
        C = int(rng.integers(2, 9))
        k = int(rng.integers(1, 6))
        data = [(f"ex{c}-{i}", f"class{c}") for c in range(C) for i in range(k + int(rng.integers(1, 5)))]
        t = gen_icl(data, k, seed=s)
        counts = Counter(y for _, y in t.demos)
        balanced = len(counts) == C and set(counts.values()) == {k}
        bijection = sorted(t.label_map.values()) == list(range(1, C + 1))
        consistent = all(t.label_map[x.split("-")[0].replace("ex", "class")] == y for x, y in t.demos)
        icl_ok += balanced and bijection and consistent and t.query not in {x for x, _ in t.demos}
    ok = kv_ok == 1000 and icl_ok == 1000
    assert report(9, "eval generators", ok, f"KV lookups {kv_ok}/1000, ICL tasks {icl_ok}/1000")


@pytest.mark.slow
def test_c10_end_to_end_determinism(report, tmp_path):
    t0 = time.perf_counter()
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(corpus, 100 * 2**20, seed=0)
    size_mb = corpus.stat().st_size / 2**20
    runs = []
    for name in ("run_a", "run_b"):
        runs.append(run_pipeline([corpus], tmp_path / name, "ablation", seed=0, budget_tokens=32 * 2**20))
    same = runs[0].outputs == runs[1].outputs and len(runs[0].outputs) > 3
    verified = all(run_pipeline_verify(tmp_path / n) for n in ("run_a", "run_b"))
    secs = time.perf_counter() - t0
    ok = same and verified and secs < 300
    assert report(10, "end-to-end determinism", ok,
                  f"{size_mb:.0f} MB corpus, {len(runs[0].outputs)} outputs identical={same}, "
                  f"two runs in {secs:.1f} s")


def run_pipeline_verify(out_dir):
    from longctx.pipeline import RunManifest

    return RunManifest.verify(out_dir / "run.manifest.json") and shards.verify_manifest(out_dir / "mixed.seqs")
