"""Command-line front end: redact, gen-corpus, eval, train-nlu, self-train."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .audio import read_wav, write_wav
from .config import apply_overrides, gen_config, parse_config_file, session_config
from .corpus import CallBundle, load_corpus, generate_corpus
from .decoder import CorruptionEvent, ReplayResult, TimedWord
from .entities import EntityType
from .metrics import Span, evaluate_run
from .nlu import load_model, save_model, self_train
from .redactor import EntityCapture, RedactionEvent
from .session import RedactedTranscript, SessionOutput, run_session
from .training import contexts_from_corpus, retrain_with_augmentation, train_from_corpus


def _mask_value(value: str) -> str:
    return "".join("*" if c.isdigit() else c for c in value)


def _capture_doc(call_id: str, cap: EntityCapture, reveal: bool) -> dict:
    value = cap.canonical.value if cap.canonical else ""
    alts = list(cap.canonical.alternatives) if cap.canonical else []
    if not reveal:
        value = _mask_value(value)
        alts = [_mask_value(a) for a in alts]
    return {
        "call_id": call_id,
        "entity_type": cap.entity_type.value,
        "channel": cap.channel,
        "span_start_ms": cap.span_start_ms,
        "span_end_ms": cap.span_end_ms,
        "valid": cap.valid,
        "value": value,
        "alternatives": alts,
    }


def _event_doc(call_id: str, ev: RedactionEvent) -> dict:
    return {"call_id": call_id, "kind": ev.kind, "time_ms": ev.time_ms, "channel": ev.channel, "detail": ev.detail}


def _write_jsonl(path: Path, docs) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc, sort_keys=True) + "\n")


def cmd_redact(args: argparse.Namespace) -> int:
    settings = parse_config_file(args.config) if args.config else {}
    settings = apply_overrides(settings, args.set or [])
    cfg = session_config(settings)
    bundles = load_corpus(args.bundle)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.model:
        from .nlu import TrainedClassifier

        model = load_model(args.model)
        make_classifier = lambda bundle: TrainedClassifier(model)  # noqa: E731
    elif args.oracle_nlu:
        from .nlu import OracleClassifier

        make_classifier = lambda bundle: OracleClassifier(bundle.gold_spans())  # noqa: E731
    else:
        print("redact: pass --model FILE or --oracle-nlu", file=sys.stderr)
        return 2

    captures, events, corruptions, decoded, masks, report_calls = [], [], [], [], [], {}
    metrics_calls = {}
    for bundle in bundles:
        audio = None
        if args.audio:
            if len(bundles) != 1:
                print("redact: --audio applies only to single-call bundles", file=sys.stderr)
                return 2
            audio = read_wav(args.audio)
        elif bundle.audio_path:
            audio = read_wav(bundle.audio_path)
        output = run_session(bundle, cfg, make_classifier(bundle), audio=audio)

        if output.masked_audio is not None:
            write_wav(out_dir / f"{bundle.call_id}.masked.wav", output.masked_audio)
        captures.extend(_capture_doc(bundle.call_id, c, args.reveal_captures) for c in output.captures)
        events.extend(_event_doc(bundle.call_id, e) for e in output.events)
        corruptions.extend(
            {"call_id": bundle.call_id, "channel": c.channel, "script_index": c.script_index,
             "kind": c.kind, "original": c.original, "replacement": c.replacement}
            for c in output.replay.corruptions
        )
        decoded.append(
            {"call_id": bundle.call_id,
             "agent_words": [[w.text, w.start_ms, w.end_ms] for w in output.replay.truth[0]],
             "caller_words": [[w.text, w.start_ms, w.end_ms] for w in output.replay.truth[1]]}
        )
        masks.extend(
            {"call_id": bundle.call_id, "channel": s.channel, "start_ms": s.start_ms,
             "end_ms": s.end_ms, "cause": s.cause}
            for s in output.mask_spans
        )
        report_calls[bundle.call_id] = {
            "transcript": output.transcript.tokens,
            "transcript_annotations": output.transcript.annotations,
            "captures": len(output.captures),
            "mask_spans": len(output.mask_spans),
            "leak_duration_ms": output.metrics.leak_duration_ms,
            "mask_open_lag_ms": {"mean": output.metrics.mask_open_lag.mean_ms,
                                 "max": output.metrics.mask_open_lag.max_ms},
        }
        metrics_calls[bundle.call_id] = {
            "cpu_vs_audio": output.metrics.cpu_vs_audio,
            "cpu_time_s": output.metrics.cpu_time_s,
            "audio_duration_s": output.metrics.audio_duration_s,
        }

    _write_jsonl(out_dir / "captures.jsonl", captures)
    _write_jsonl(out_dir / "events.jsonl", events)
    _write_jsonl(out_dir / "corruptions.jsonl", corruptions)
    _write_jsonl(out_dir / "decoded.jsonl", decoded)
    _write_jsonl(out_dir / "masks.jsonl", masks)
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump({"calls": report_calls}, fh, sort_keys=True, indent=2)
    # CPU timings are measured, hence non-deterministic; they live apart so
    # report.json stays byte-reproducible.
    with open(out_dir / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump({"calls": metrics_calls}, fh, sort_keys=True, indent=2)
    print(f"redact: {len(bundles)} call(s) -> {out_dir}")
    return 0


def cmd_gen_corpus(args: argparse.Namespace) -> int:
    settings = parse_config_file(args.config) if args.config else {}
    settings = apply_overrides(settings, args.set or [])
    cfg = gen_config(settings)
    bundles = generate_corpus(cfg, out_dir=args.out)
    print(f"gen-corpus: wrote {len(bundles)} calls to {args.out}")
    return 0


def _load_predictions(pred_dir: Path, bundles: list[CallBundle]) -> list[SessionOutput]:
    from .audio import MaskSpan

    def read_jsonl(name: str) -> list[dict]:
        path = pred_dir / name
        if not path.exists():
            return []
        with open(path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    captures = read_jsonl("captures.jsonl")
    events = read_jsonl("events.jsonl")
    corruptions = read_jsonl("corruptions.jsonl")
    decoded = {d["call_id"]: d for d in read_jsonl("decoded.jsonl")}
    masks = read_jsonl("masks.jsonl")

    outputs = []
    for b in bundles:
        dec = decoded.get(b.call_id, {"agent_words": [], "caller_words": []})
        truth = [
            [TimedWord(t, s, e, ch) for t, s, e in dec[key]]
            for ch, key in ((0, "agent_words"), (1, "caller_words"))
        ]
        replay = ReplayResult(
            hypotheses=[],
            truth=truth,
            origins=[[], []],
            corruptions=[
                CorruptionEvent(c["channel"], c["script_index"], c["kind"], c["original"], c["replacement"])
                for c in corruptions
                if c["call_id"] == b.call_id
            ],
        )
        outputs.append(
            SessionOutput(
                call_id=b.call_id,
                masked_audio=None,
                transcript=RedactedTranscript([], []),
                captures=[
                    EntityCapture(
                        EntityType[c["entity_type"]], None, c["channel"],
                        c["span_start_ms"], c["span_end_ms"], (), c["valid"]
                    )
                    for c in captures
                    if c["call_id"] == b.call_id
                ],
                events=[
                    RedactionEvent(e["kind"], e["time_ms"], e["channel"], e["detail"])
                    for e in events
                    if e["call_id"] == b.call_id
                ],
                mask_spans=[
                    MaskSpan(m["channel"], m["start_ms"], m["end_ms"], m["cause"])
                    for m in masks
                    if m["call_id"] == b.call_id
                ],
                replay=replay,
                metrics=None,
            )
        )
    return outputs


def _baseline_spans(baseline_dir: Path, bundles: list[CallBundle]) -> dict[str, list[Span]]:
    outputs = _load_predictions(baseline_dir, bundles)
    spans: dict[str, list[Span]] = {}
    for b, o in zip(bundles, outputs):
        from .metrics import _predicted_spans

        spans[b.call_id] = _predicted_spans(o, b)
    return spans


def cmd_eval(args: argparse.Namespace) -> int:
    bundles = load_corpus(args.gold)
    outputs = _load_predictions(Path(args.pred), bundles)
    baseline = _baseline_spans(Path(args.baseline), bundles) if args.baseline else None
    report = evaluate_run(bundles, outputs, baseline_spans=baseline)
    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, sort_keys=True, indent=2)
    print(report.to_text())
    return 0


def cmd_train_nlu(args: argparse.Namespace) -> int:
    settings = parse_config_file(args.config) if args.config else {}
    settings = apply_overrides(settings, args.set or [])
    bundles = load_corpus(args.corpus)
    model = train_from_corpus(
        bundles,
        l2_lambda=args.l2_lambda if args.l2_lambda is not None else settings.get("nlu.l2_lambda", 1e-3),
        tol=settings.get("nlu.tol", 1e-6),
        min_freq=settings.get("nlu.min_freq", 2),
        ngram_orders=settings.get("nlu.ngram_orders", (1, 2, 3)),
    )
    save_model(model, args.model)
    print(f"train-nlu: {len(bundles)} calls, {len(model.vocabulary)} features -> {args.model}")
    return 0


def cmd_self_train(args: argparse.Namespace) -> int:
    teacher = load_model(args.model)
    unlabeled = contexts_from_corpus(load_corpus(args.unlabeled))
    result = self_train(
        teacher,
        [(ctx, label) for ctx, label in unlabeled],
        easy_conf=args.easy_conf,
        hard_entropy=args.hard_entropy,
        hard_fraction=args.hard_fraction,
    )
    base = contexts_from_corpus(load_corpus(args.corpus)) if args.corpus else []
    augmented = [(s.context, s.label) for s in result.samples]
    model = retrain_with_augmentation(teacher, base, augmented)
    save_model(model, args.out_model)
    print(
        f"self-train: easy {result.easy}, hard kept {result.hard_kept} "
        f"(skipped {result.hard_skipped_no_gold}, capped {result.hard_dropped_cap}) -> {args.out_model}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liveredact", description="Real-time PII redaction engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("redact", help="run the redaction pipeline over a call bundle")
    p.add_argument("--bundle", required=True, help="bundle .jsonl file or corpus dir")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--audio", help="WAV override for a single-call bundle")
    p.add_argument("--model", help="trained NLU model file")
    p.add_argument("--oracle-nlu", action="store_true", help="use gold-type lookup instead of a model")
    p.add_argument("--reveal-captures", action="store_true", help="write plaintext canonical values (testing only)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.set_defaults(func=cmd_redact)

    p = sub.add_parser("gen-corpus", help="generate a synthetic annotated corpus")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--out", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("eval", help="score predictions against a gold corpus")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--baseline", help="second prediction dir for comparison mode")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("train-nlu", help="train the entity-type classifier")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--lambda", dest="l2_lambda", type=float, default=None)
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_train_nlu)

    p = sub.add_parser("self-train", help="uncertainty-aware self-training augmentation")
    p.add_argument("--model", required=True)
    p.add_argument("--unlabeled", required=True)
    p.add_argument("--out-model", required=True)
    p.add_argument("--corpus", help="labeled base corpus to retrain with")
    p.add_argument("--easy-conf", type=float, default=0.9)
    p.add_argument("--hard-entropy", type=float, default=1.2)
    p.add_argument("--hard-fraction", type=float, default=0.25)
    p.set_defaults(func=cmd_self_train)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
