"""Command-line entry point: ``longctx <subcommand> ...``.

Every subcommand that writes a file also writes ``<file>.manifest.json``
holding the run manifest (command, config hash, seed, input and output
digests, counters, wall time). Settings may come from ``--config FILE``
(a TOML file with one table per subcommand); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from . import corpus, evalgen, mixer, packer, pipeline, scheduler, shards, synthgen, trainmath
from .pipeline import RunManifest, config_hash

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

log = logging.getLogger("longctx")


class UsageError(Exception):
    pass


def _ints(text: str) -> List[int]:
    return [int(float(x)) for x in str(text).split(",") if x.strip()]


def _finish(manifest: RunManifest, out: Path, t0: float, **extra) -> None:
    manifest.add_output(out)
    manifest.wall_time = time.perf_counter() - t0
    data = {"shard": out.name, "sha256": manifest.outputs[out.name], **manifest.to_dict(), **extra}
    shards.manifest_path(out).write_text(json.dumps(data, indent=2, sort_keys=True, default=str) + "\n")


def _manifest(args, command: str) -> RunManifest:
    settings = {k: v for k, v in vars(args).items() if k not in {"func", "config"}}
    return RunManifest(command, getattr(args, "seed", None), config_hash(settings))


def _need(args, *names: str) -> None:
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _read_docs(paths: Sequence[str], manifest: RunManifest, stats: corpus.IngestStats):
    for p in paths:
        manifest.add_input(p)
        if shards.shard_kind(p) == "documents":
            yield from shards.read_documents(p)
        else:
            yield from corpus.ingest(p, stats=stats)


# --- subcommands -------------------------------------------------------------


def cmd_ingest(args) -> int:
    _need(args, "input", "out")
    t0 = time.perf_counter()
    m = _manifest(args, "ingest")
    m.add_input(args.input)
    stats = corpus.IngestStats()
    docs = corpus.ingest(args.input, args.domain, stats=stats)
    if args.concat_repos:
        docs = corpus.group_repos(docs, args.separator)
    out = Path(args.out)
    counts = shards.write_documents(out, docs)
    m.counters = {"records": stats.records, "documents": stats.documents, "tokens": stats.tokens,
                  "dropped_empty": stats.dropped_empty, "errors": stats.errors}
    _finish(m, out, t0, domains=counts)
    for e in stats.errors:
        print(f"warning: {e}", file=sys.stderr)
    print(json.dumps({"documents": sum(counts.values()), "dropped_empty": stats.dropped_empty,
                      "errors": len(stats.errors), "domains": counts}))
    return 0


def cmd_census(args) -> int:
    _need(args, "input")
    m = _manifest(args, "census")
    stats = corpus.IngestStats()
    docs = _read_docs(args.input, m, stats)
    if args.concat_repos:
        docs = corpus.group_repos(docs)
    result = corpus.census(docs, _ints(args.thresholds), args.long_threshold)
    text = json.dumps(result.to_dict(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_pack(args) -> int:
    _need(args, "input", "out")
    t0 = time.perf_counter()
    m = _manifest(args, "pack")
    stats = packer.PackStats()
    out = Path(args.out)
    if args.mode == "sft":
        convs = []
        for p in args.input:
            m.add_input(p)
            with open(p, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    if not line.strip():
                        continue
                    try:
                        convs.append(packer.conversation_from_record(json.loads(line)))
                    except (ValueError, KeyError, TypeError) as exc:
                        stats.rejected.append(f"{p}:{lineno}: {exc}")
        counts = shards.write_sft(out, packer.pack_sft(convs, args.length, stats))
    else:
        ingest_stats = corpus.IngestStats()
        docs = _read_docs(args.input, m, ingest_stats)
        if args.mode == "long":
            seqs = packer.pack_long(docs, args.length, stats)
        else:
            _need(args, "seed")
            docs = pipeline.seeded_shuffle(list(docs), args.seed)
            seqs = packer.pack_short(docs, args.length, args.carry, args.separator, stats)
        counts = shards.write_sequences(out, seqs)
    m.counters = stats.as_dict()
    _finish(m, out, t0, mode=args.mode, length=args.length, segments=counts, rejected=stats.rejected)
    for r in stats.rejected:
        print(f"rejected: {r}", file=sys.stderr)
    print(json.dumps(m.counters, sort_keys=True))
    return 0


def _spec_from_args(args):
    if args.spec:
        path = Path(args.spec)
        if not path.exists():
            raise FileNotFoundError(f"spec file not found: {path}")
        spec, cur = mixer.load(path)
        base = Path(args.pool_dir) if args.pool_dir else path.parent
    else:
        spec, cur = mixer.load_preset(args.preset)
        base = Path(args.pool_dir or ".")
    return spec, cur, base


def cmd_mix(args) -> int:
    _need(args, "seed", "out")
    if not args.spec and not args.preset:
        raise UsageError("one of --spec or --preset is required")
    t0 = time.perf_counter()
    m = _manifest(args, "mix")
    spec, cur, base = _spec_from_args(args)
    spec.seed = args.seed
    problems = mixer.validate_spec(spec, cur)
    leaves = mixer.leaf_targets(spec, cur)
    paths = {key: mixer.pool_path(spec.domain(key[0]), key[1], base) for key in leaves}
    for (name, length), p in paths.items():
        if not p.exists():
            problems.append(f"pool not found: {p}")
    if problems:
        raise ValueError("invalid mixture:\n  " + "\n  ".join(problems))
    pools = {}
    for key, p in paths.items():
        m.add_input(p)
        pools[key] = list(shards.read_sequences(p))
    stats = mixer.MixStats()
    out = Path(args.out)
    budget = args.budget_tokens if args.budget_tokens is not None else cur.budget_tokens
    shards.write_sequences(out, mixer.sample_stream(spec, cur, pools, budget, wrap=not args.no_wrap, stats=stats))
    m.counters = stats.as_dict()
    _finish(m, out, t0, stage=spec.stage, targets=spec.target_fractions())
    print(json.dumps(m.counters, sort_keys=True))
    return 0


def cmd_plan(args) -> int:
    _need(args, "input")
    t0 = time.perf_counter()
    m = _manifest(args, "plan")
    model = scheduler.CostModel(args.linear)

    def seqs():
        for p in args.input:
            m.add_input(p)
            yield from shards.read_sequences(p)

    report = scheduler.throughput_report(seqs(), args.devices, args.accum, model)
    summary = report.summary()
    if not args.reorder:
        summary["note"] = "reordering disabled; sorted makespan shown for comparison only"
    text = json.dumps(summary, indent=2, sort_keys=True)
    if args.report:
        out = Path(args.report)
        out.write_text(text + "\n")
        csv_path = out.with_suffix(".csv")
        csv_path.write_text(report.to_csv())
        m.add_output(csv_path)
        m.counters = summary
        _finish(m, out, t0)
    print(text)
    return 0


def cmd_rope(args) -> int:
    cfg = trainmath.RopeConfig(args.orig_base, args.orig_len, args.target_len, args.head_dim)
    suggested = trainmath.suggested_base(cfg, args.multiplier)
    print(f"suggested base: {suggested:.3g}")
    print(f"exact: {suggested!r}")
    print(f"recipe base stage 1 (64K): {trainmath.recipe_base(1):.3g}")
    print(f"recipe base stage 2 (512K): {trainmath.recipe_base(2):.3g}")
    return 0


def cmd_lossagg(args) -> int:
    shards_: List[trainmath.LossShard] = []
    for lineno, line in enumerate(sys.stdin, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            if line.startswith("{"):
                rec = json.loads(line)
                shards_.append(trainmath.LossShard(float(rec["loss_sum"]), int(rec["token_count"])))
            else:
                a, b = line.replace(",", " ").split()
                shards_.append(trainmath.LossShard(float(a), int(b)))
        except (ValueError, KeyError) as exc:
            raise ValueError(f"stdin line {lineno}: {exc}") from None
    avg = trainmath.token_avg(shards_)
    out = {"token_avg": avg, "tokens": sum(s.token_count for s in shards_), "shards": len(shards_)}
    try:
        out["sequence_avg"] = trainmath.sequence_avg(shards_)
    except ValueError:
        pass
    print(json.dumps(out))
    return 0


def _synth_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def cmd_synthgen(args) -> int:
    _need(args, "seed", "input", "out")
    t0 = time.perf_counter()
    m = _manifest(args, "synthgen")
    conf = _synth_config(args.spec)
    synth = synthgen.SynthConfig(**{k: v for k, v in conf.get("synth", {}).items()
                                    if k in synthgen.SynthConfig.__dataclass_fields__})
    tok = corpus.WhitespaceTokenizer()
    docs = []
    for p in args.input:
        m.add_input(p)
        docs.extend(corpus.ingest(p, tokenizer=tok))
    log_path = Path(args.log) if args.log else Path(str(args.out) + ".requests.jsonl")
    req_log = synthgen.RequestLog(log_path)
    if args.replay:
        client = synthgen.ReplayClient(req_log)
    elif args.stub:
        client = synthgen.StubClient()
    else:
        _need(args, "endpoint")
        svc = conf.get("service", {})
        client = synthgen.GenerationClient(
            args.endpoint, model=svc.get("model", "Llama-3-8B-Instruct"),
            temperature=float(svc.get("temperature", 0.8)),
            max_attempts=int(svc.get("max_attempts", 3)),
        )
    builder = synthgen.SynthBuilder(client, req_log, tok, synth)
    jobs = [(args.kind, d, args.seed + i) for i, d in enumerate(docs)]
    result = builder.build_many(jobs)
    out = Path(args.out)
    shards.write_sft(out, result.examples)
    m.counters = {"examples": len(result.examples), "skipped": len(result.skipped),
                  "tokens": sum(e.length for e in result.examples),
                  "trained_tokens": sum(e.trained_tokens for e in result.examples)}
    _finish(m, out, t0, kind=args.kind, request_log=log_path.name, skipped=result.skipped)
    print(json.dumps(m.counters, sort_keys=True))
    return 0


def cmd_evalgen(args) -> int:
    _need(args, "seed")
    t0 = time.perf_counter()
    m = _manifest(args, f"evalgen {args.task}")
    if args.task == "kv":
        if args.target_tokens:
            task = evalgen.fit_kv(args.target_tokens, args.seed, args.key_len, args.val_len)
        else:
            _need(args, "pairs")
            task = evalgen.gen_kv(args.pairs, args.seed, args.key_len, args.val_len)
        text = task.to_json() + "\n"
        m.counters = {"pairs": len(task.pairs)}
    else:
        _need(args, "dataset", "k")
        m.add_input(args.dataset)
        data = []
        with open(args.dataset, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    data.append((str(rec["input"]), rec["label"]))
        task = evalgen.gen_icl(data, args.k, args.seed)
        text = task.to_ndjson()
        m.counters = {"demos": len(task.demos), "classes": len(task.classes)}
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        _finish(m, out, t0)
    else:
        sys.stdout.write(text)
    return 0


def cmd_pipeline(args) -> int:
    _need(args, "seed", "input", "out_dir")
    man = pipeline.run_pipeline(args.input, args.out_dir, args.preset, args.seed, args.budget_tokens,
                                args.devices, args.accum, args.spec)
    print(json.dumps(man.outputs, indent=2, sort_keys=True))
    return 0


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="longctx", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="TOML file with per-subcommand defaults")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="NDJSON records -> document shard")
    s.add_argument("--domain")
    s.add_argument("--input")
    s.add_argument("--out")
    s.add_argument("--concat-repos", action="store_true", help="join files sharing repo_key")
    s.add_argument("--separator", type=int, default=corpus.DEFAULT_SEPARATOR)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("census", help="length statistics per domain")
    s.add_argument("input", nargs="*")
    s.add_argument("--thresholds", default="4096,8192,16384,32768")
    s.add_argument("--long-threshold", type=int, default=corpus.LONG_THRESHOLD)
    s.add_argument("--concat-repos", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_census)

    s = sub.add_parser("pack", help="documents -> packed sequences")
    s.add_argument("input", nargs="*")
    s.add_argument("--mode", choices=["short", "long", "sft"], default="short")
    s.add_argument("--length", type=int, default=65536)
    s.add_argument("--carry", action=argparse.BooleanOptionalAction, default=True)
    s.add_argument("--separator", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_pack)

    s = sub.add_parser("mix", help="sample a stage mixture from packed pools")
    s.add_argument("--spec")
    s.add_argument("--preset", choices=["stage1", "stage2", "ablation"])
    s.add_argument("--pool-dir")
    s.add_argument("--budget-tokens", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--no-wrap", action="store_true", help="fail instead of re-epoching an exhausted pool")
    s.add_argument("--out")
    s.set_defaults(func=cmd_mix)

    s = sub.add_parser("plan", help="model step makespans with and without reordering")
    s.add_argument("input", nargs="*")
    s.add_argument("--devices", type=int, default=8)
    s.add_argument("--accum", type=int, default=4)
    s.add_argument("--reorder", action="store_true")
    s.add_argument("--linear", type=float, default=0.0)
    s.add_argument("--report")
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("rope", help="dynamic-NTK frequency base")
    s.add_argument("--orig-base", type=float, default=trainmath.LLAMA3_BASE)
    s.add_argument("--orig-len", type=int, default=8192)
    s.add_argument("--target-len", type=int, default=65536)
    s.add_argument("--head-dim", type=int, default=128)
    s.add_argument("--multiplier", type=float, default=1.0)
    s.set_defaults(func=cmd_rope)

    s = sub.add_parser("lossagg", help="token-averaged loss from 'loss_sum token_count' lines on stdin")
    s.set_defaults(func=cmd_lossagg)

    s = sub.add_parser("synthgen", help="synthetic QA / RAG / summarization SFT examples")
    s.add_argument("input", nargs="*")
    s.add_argument("--kind", choices=["qa", "rag", "summ"], default="qa")
    s.add_argument("--spec")
    s.add_argument("--endpoint")
    s.add_argument("--seed", type=int)
    s.add_argument("--log")
    s.add_argument("--out")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--stub", action="store_true", help="use the offline stub generator")
    g.add_argument("--replay", action="store_true", help="answer only from the request log")
    s.set_defaults(func=cmd_synthgen)

    s = sub.add_parser("evalgen", help="synthetic evaluation tasks")
    s.add_argument("task", choices=["kv", "icl"])
    s.add_argument("--pairs", type=int)
    s.add_argument("--key-len", type=int, default=32)
    s.add_argument("--val-len", type=int, default=32)
    s.add_argument("--target-tokens", type=int)
    s.add_argument("--dataset")
    s.add_argument("--k", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_evalgen)

    s = sub.add_parser("pipeline", help="ingest -> pack -> mix -> plan for one stage")
    s.add_argument("input", nargs="*")
    s.add_argument("--preset", default="ablation")
    s.add_argument("--spec")
    s.add_argument("--budget-tokens", type=int)
    s.add_argument("--devices", type=int, default=8)
    s.add_argument("--accum", type=int, default=4)
    s.add_argument("--seed", type=int)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_pipeline)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return
    with open(known.config, "rb") as fh:
        conf = tomllib.load(fh)
    command = next((a for a in rest if not a.startswith("-")), None)
    section = conf.get(command, {}) if command else {}
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    if command in subparsers.choices:
        subparsers.choices[command].set_defaults(**{k.replace("-", "_"): v for k, v in section.items()})


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError, OSError, mixer.PoolExhausted, synthgen.GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
