"""Command-line entry point.

    coc-asr simulate  --synthetic 100 --profile default --out corpus.jsonl
    coc-asr prepare   corpus.jsonl --out train.jsonl
    coc-asr correct   corpus.jsonl --out results/ --mock identity
    coc-asr evaluate  results/corrected.jsonl --baseline corpus.jsonl

Exit status: 0 success, 1 some documents failed, 2 configuration/input error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from coc_asr import __version__
from coc_asr.align import KERNEL, MetricReport
from coc_asr.chat import Guidance
from coc_asr.corpus import (
    CorpusError,
    Document,
    NoiseProfile,
    export_training_chats,
    iter_jsonl,
    load_corpus,
    noisy_document,
    segmentize,
    synthetic_corpus,
    write_corpus,
    write_jsonl,
)
from coc_asr.engine import (
    EngineConfig,
    HttpClient,
    IdentityMock,
    OracleMock,
    RecordingClient,
    ReplayClient,
    corpus_report,
    run_batch,
    session_records,
    sweep_csv_rows,
    threshold_sweep,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("coc_asr")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(path: Path, args: argparse.Namespace, started: str, extra: Optional[dict] = None) -> None:
    config = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {
        "command": args.command,
        "config": config,
        "started": started,
        "finished": _now(),
        "tool": "coc-asr",
        "version": __version__,
        "kernel": KERNEL,
    }
    if extra:
        manifest.update(extra)
    path.write_text(json.dumps(manifest, ensure_ascii=False, indent=2, default=str) + "\n", encoding="utf-8")


# --- commands ---------------------------------------------------------------

def cmd_prepare(args) -> int:
    started = _now()
    docs = load_corpus(args.input)
    n = export_training_chats(docs, args.out, args.max_sentences, args.seed, Guidance(args.guidance))
    if args.check:
        for doc in docs:
            segs = segmentize(doc, args.max_sentences, args.seed)
            if "".join(s.hyp_segment for s in segs) != doc.hyp_text or \
                    "".join(s.ref_segment for s in segs) != doc.ref_text:
                raise CorpusError(f"document {doc.id!r}: segment round trip failed")
    write_manifest(Path(str(args.out) + ".manifest.json"), args, started, {"documents": n})
    print(f"wrote {n} training conversations to {args.out}")
    return EXIT_OK


def _clean_texts(path) -> list[tuple[str, str]]:
    out = []
    for lineno, obj in iter_jsonl(path):
        text = obj.get("text", obj.get("ref")) if isinstance(obj, dict) else None
        if not isinstance(text, str) or not isinstance(obj.get("id"), str):
            raise CorpusError(f"{path}: line {lineno}: need string fields 'id' and 'text'")
        out.append((obj["id"], text))
    return out


def cmd_simulate(args) -> int:
    started = _now()
    profile = NoiseProfile.parse(args.profile, seed=args.seed)
    if args.synthetic is not None:
        docs = synthetic_corpus(args.synthetic, profile, seed=args.seed)
    elif args.input:
        docs = [noisy_document(doc_id, text, profile) for doc_id, text in _clean_texts(args.input)]
    else:
        raise ConfigError("simulate needs an input file or --synthetic N")
    n = write_corpus(args.out, docs)
    write_manifest(Path(str(args.out) + ".manifest.json"), args, started,
                   {"documents": n, "profile": profile.__dict__})
    print(f"wrote {n} documents to {args.out}")
    return EXIT_OK


def _make_client(args):
    if args.mock == "identity":
        return IdentityMock()
    if args.mock == "oracle":
        return OracleMock()
    if args.mock == "replay":
        if not args.replay:
            raise ConfigError("--mock replay requires --replay FILE")
        return ReplayClient.load(args.replay)
    if args.mock:
        raise ConfigError(f"unknown mock {args.mock!r}")
    if not args.endpoint or not args.model:
        raise ConfigError("give --endpoint and --model, or --mock")
    return HttpClient(args.endpoint, args.model, api_key_env=args.api_key_env)


def cmd_correct(args) -> int:
    started = _now()
    docs = load_corpus(args.input)
    try:
        cfg = EngineConfig(
            threshold=args.threshold,
            max_retries=args.retries,
            guidance=Guidance(args.guidance),
            context_limit_tokens=args.context_limit,
            temperature=args.temperature,
            strict_context=args.strict_context,
            history=args.history,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e
    client = RecordingClient(_make_client(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    batch = run_batch(docs, client, cfg, parallelism=args.parallel,
                      max_sentences=args.max_sentences, seed=args.seed)
    by_id = {r.doc_id: r for r in batch.results}
    write_jsonl(out / "corrected.jsonl", (
        Document(d.id, by_id[d.id].corrected_text, d.ref_text).to_json()
        for d in docs if d.id in by_id
    ))
    write_jsonl(out / "decisions.jsonl", (rec for r in batch.results for rec in session_records(r)))
    write_jsonl(out / "transcripts.jsonl", (
        {"id": r.doc_id, **r.transcript.to_wire()} for r in batch.results
    ))
    write_jsonl(out / "records.jsonl", client.sorted_records())
    summary = {"documents": len(docs), "failed": len(batch.failures),
               "correction_ratio": batch.correction_ratio}
    if batch.failures:
        (out / "failures.json").write_text(json.dumps(batch.failures, ensure_ascii=False, indent=2), encoding="utf-8")
    if batch.report is not None:
        batch.report.check_additivity()
        (out / "report.json").write_text(json.dumps(batch.report.to_dict(), indent=2) + "\n", encoding="utf-8")
        print(batch.report.format_table())
    print(f"correction ratio: {batch.correction_ratio:.4f}  "
          f"({len(batch.results)} ok, {len(batch.failures)} failed)")

    if args.sweep:
        thresholds = [float(t) for t in args.sweep.split(",") if t.strip()]
        points = threshold_sweep(docs, client.inner, thresholds, cfg, args.max_sentences, args.seed)
        (out / "sweep.csv").write_text("\n".join(sweep_csv_rows(points)) + "\n", encoding="utf-8")
        summary["sweep"] = thresholds

    write_manifest(out / "manifest.json", args, started,
                   {"engine": cfg.snapshot(), "summary": summary})
    return EXIT_PARTIAL if batch.failures else EXIT_OK


def _refs_by_id(path) -> dict[str, str]:
    refs = {}
    for d in load_corpus(path):
        if d.ref_text is None:
            raise CorpusError(f"{path}: document {d.id!r} has no 'ref'")
        refs[d.id] = d.ref_text
    return refs


def evaluate_corpus(hyp_path, reference=None, baseline=None) -> MetricReport:
    docs = load_corpus(hyp_path)
    refs = _refs_by_id(reference) if reference else None

    def ref_of(d: Document) -> str:
        r = refs.get(d.id) if refs is not None else d.ref_text
        if r is None:
            raise CorpusError(f"document {d.id!r} has no reference")
        return r

    report = corpus_report((ref_of(d), d.hyp_text) for d in docs)
    report.check_additivity()
    if baseline:
        base_docs = {d.id: d for d in load_corpus(baseline)}
        missing = [d.id for d in docs if d.id not in base_docs]
        if missing:
            raise CorpusError(f"baseline lacks documents: {missing[:5]}")
        base = corpus_report((ref_of(d), base_docs[d.id].hyp_text) for d in docs)
        base.check_additivity()
        report = report.with_baseline(base)
    return report


def cmd_evaluate(args) -> int:
    report = evaluate_corpus(args.input, args.reference, args.baseline)
    print(report.format_table())
    if args.json:
        Path(args.json).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


# --- argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coc-asr", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({KERNEL} kernel)")
    p.add_argument("--config", help="TOML file of flag defaults (keys = long flag names)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("prepare", help="segment a corpus and export training chats")
    s.add_argument("input")
    s.add_argument("--out", required=True)
    s.add_argument("--max-sentences", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--guidance", choices=[g.value for g in Guidance], default="hyp")
    s.add_argument("--check", action="store_true", help="verify segment round trip for every document")
    s.set_defaults(func=cmd_prepare)

    s = sub.add_parser("simulate", help="make a noisy corpus from clean text")
    s.add_argument("input", nargs="?", help="JSONL with 'id' and 'text' per line")
    s.add_argument("--out", required=True)
    s.add_argument("--profile", default="default", help="preset name or key=value,... overrides")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--synthetic", type=int, metavar="N", help="generate N synthetic articles instead of reading input")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("correct", help="run correction sessions over a corpus")
    s.add_argument("input")
    s.add_argument("--out", required=True, help="results directory")
    s.add_argument("--endpoint")
    s.add_argument("--model")
    s.add_argument("--api-key-env", default="COC_ASR_API_KEY")
    s.add_argument("--mock", choices=["identity", "oracle", "replay"])
    s.add_argument("--replay", help="records JSONL for --mock replay")
    s.add_argument("--threshold", type=float, default=0.3)
    s.add_argument("--guidance", choices=[g.value for g in Guidance], default="hyp")
    s.add_argument("--retries", type=int, default=0)
    s.add_argument("--parallel", type=int, default=1)
    s.add_argument("--max-sentences", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--temperature", type=float, default=0.0)
    s.add_argument("--context-limit", type=int, default=256_000)
    s.add_argument("--strict-context", action="store_true")
    s.add_argument("--history", choices=["emitted", "model"], default="emitted")
    s.add_argument("--sweep", help="comma-separated thresholds; writes sweep.csv")
    s.set_defaults(func=cmd_correct)

    s = sub.add_parser("evaluate", help="score a corpus (hyp vs ref)")
    s.add_argument("input", help="JSONL whose 'hyp' is scored")
    s.add_argument("--reference", help="take 'ref' from this JSONL (matched by id)")
    s.add_argument("--baseline", help="JSONL whose 'hyp' is the baseline for ERR")
    s.add_argument("--json", help="write the report as JSON here")
    s.set_defaults(func=cmd_evaluate)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        with open(args.config, "rb") as f:
            conf = tomllib.load(f)
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot read config {args.config}: {e}") from e
    section = conf.get(args.command, conf)
    defaults = {k.replace("-", "_"): v for k, v in section.items() if not isinstance(v, dict)}
    unknown = set(defaults) - set(vars(args))
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    sub = next(a for a in parser._subparsers._group_actions if isinstance(a, argparse._SubParsersAction))
    sub.choices[args.command].set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CorpusError, ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
