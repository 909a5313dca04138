"""End-to-end data pipeline: ingest -> repos -> pools -> mix -> step plans."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import mixer, scheduler, shards
from .corpus import Document, IngestStats, group_repos, ingest
from .mixer import LONG, MixStats, MixtureSpec, PoolKey, StageCurriculum
from .packer import PackedSequence, PackStats, filter_long, pack_long, pack_short

log = logging.getLogger(__name__)


def config_hash(data: dict) -> str:
    return hashlib.sha256(json.dumps(data, sort_keys=True, default=str).encode()).hexdigest()


@dataclass
class RunManifest:
    command: str
    seed: Optional[int]
    config_hash: str = ""
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    counters: Dict[str, object] = field(default_factory=dict)
    wall_time: float = 0.0

    def add_input(self, path: Union[str, os.PathLike]) -> None:
        self.inputs[str(path)] = shards.file_digest(path)

    def add_output(self, path: Union[str, os.PathLike]) -> None:
        self.outputs[Path(path).name] = shards.file_digest(path)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "inputs": self.inputs,
            "outputs": dict(sorted(self.outputs.items())),
            "counters": self.counters,
            "wall_time": self.wall_time,
        }

    def write(self, path: Union[str, os.PathLike]) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True, default=str) + "\n")
        return path

    @staticmethod
    def verify(path: Union[str, os.PathLike]) -> bool:
        """True iff every output listed in the manifest still has its recorded digest."""
        path = Path(path)
        data = json.loads(path.read_text())
        return all(shards.file_digest(path.parent / name) == d for name, d in data["outputs"].items())


def seeded_shuffle(docs: Sequence[Document], seed: int) -> List[Document]:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0x5A])))
    return [docs[i] for i in rng.permutation(len(docs))]


def build_pools(
    docs_by_domain: Dict[str, List[Document]],
    spec: MixtureSpec,
    curriculum: StageCurriculum,
    seed: int,
    counters: Optional[dict] = None,
) -> Dict[PoolKey, List[PackedSequence]]:
    """Pack every (domain, length class) leaf the mixture needs.

    Long domains: documents are filtered and truncated to the class length;
    classes shorter than the stage sequence length are then packed several
    per sequence, after removing documents already used at full length.
    Short domains: documents are shuffled (seeded) and packed with carry-over.
    """
    counters = counters if counters is not None else {}
    pools: Dict[PoolKey, List[PackedSequence]] = {}
    L = curriculum.seq_len
    for d in spec.domains:
        docs = docs_by_domain.get(d.name, [])
        if d.group == LONG:
            classes = sorted(curriculum.split_for(d), reverse=True)
            used: set = set()
            full: List[PackedSequence] = []
            for c in classes:
                st = PackStats()
                if c >= L:
                    seqs = list(pack_long(docs, c, st))
                    full.extend(seqs)
                    used.update(s.origin_ids[0] for s in seqs)
                else:
                    fresh = [doc for doc in docs if doc.id not in used]
                    seqs = list(pack_short(filter_long(fresh, c, st), L, carry=True, stats=st))
                    # documents were excluded up front; this only guards the invariant
                    seqs, _, removed = mixer.dedup_pools(seqs, full)
                    counters[f"dedup:{d.name}@{c}"] = len(docs) - len(fresh) + removed
                pools[(d.name, c)] = seqs
                counters[f"pack:{d.name}@{c}"] = st.as_dict()
        else:
            st = PackStats()
            seqs = list(pack_short(seeded_shuffle(docs, seed), L, carry=True, stats=st))
            for c in curriculum.split_for(d):
                pools[(d.name, c)] = seqs
            counters[f"pack:{d.name}@{L}"] = st.as_dict()
    return pools


def load_corpus(paths: Iterable[Union[str, os.PathLike]], counters: dict, manifest: RunManifest) -> Dict[str, List[Document]]:
    stats = IngestStats()
    by_domain: Dict[str, List[Document]] = {}
    for p in paths:
        manifest.add_input(p)
        if shards.shard_kind(p) == "documents":
            stream = shards.read_documents(p)
        else:
            stream = ingest(p, stats=stats)
        for doc in group_repos(stream):
            by_domain.setdefault(doc.domain, []).append(doc)
    counters["ingest"] = {
        "records": stats.records,
        "documents": stats.documents,
        "tokens": stats.tokens,
        "dropped_empty": stats.dropped_empty,
        "errors": len(stats.errors),
    }
    counters["domains"] = {k: len(v) for k, v in sorted(by_domain.items())}
    return by_domain


def run_pipeline(
    inputs: Sequence[Union[str, os.PathLike]],
    out_dir: Union[str, os.PathLike],
    preset: str = "ablation",
    seed: int = 0,
    budget_tokens: Optional[int] = None,
    devices: int = 8,
    accum_steps: int = 4,
    spec_path: Optional[Union[str, os.PathLike]] = None,
) -> RunManifest:
    """Run the whole data path for one stage and write shards, report and manifest to ``out_dir``."""
    t0 = time.perf_counter()
    out = Path(out_dir)
    (out / "pools").mkdir(parents=True, exist_ok=True)
    spec, cur = mixer.load(spec_path) if spec_path else mixer.load_preset(preset)
    spec.seed = seed
    manifest = RunManifest("pipeline", seed, config_hash(mixer.spec_to_dict(spec, cur)))
    counters: dict = {}

    by_domain = load_corpus(inputs, counters, manifest)
    pools = build_pools(by_domain, spec, cur, seed, counters)
    problems = mixer.validate_spec(spec, cur, pools)
    if problems:
        raise ValueError("; ".join(problems))
    for (name, c), seqs in sorted(pools.items()):
        p = out / "pools" / f"{name}.{c}.seqs"
        shards.write_sequences(p, seqs)
        shards.write_manifest(p, domain=name, length_class=c, sequences=len(seqs))
        manifest.outputs[f"pools/{p.name}"] = shards.file_digest(p)

    mix_stats = MixStats()
    budget = budget_tokens if budget_tokens is not None else cur.budget_tokens
    mixed = list(mixer.sample_stream(spec, cur, pools, budget, stats=mix_stats))
    mixed_path = out / "mixed.seqs"
    shards.write_sequences(mixed_path, mixed)
    shards.write_manifest(mixed_path, stage=spec.stage, seed=seed, **mix_stats.as_dict())
    manifest.add_output(mixed_path)
    counters["mix"] = mix_stats.as_dict()

    report = scheduler.throughput_report(mixed, devices, accum_steps)
    (out / "plan_report.json").write_text(report.to_text())
    (out / "plan_steps.csv").write_text(report.to_csv())
    manifest.add_output(out / "plan_report.json")
    manifest.add_output(out / "plan_steps.csv")
    counters["plan"] = report.summary()

    manifest.counters = counters
    manifest.wall_time = time.perf_counter() - t0
    manifest.write(out / "run.manifest.json")
    return manifest
