"""Evaluation: WER/SER, exact-boundary entity P/R/F1, mask coverage and
leak-cause attribution.

An entity prediction counts as a true positive only when its first word
index, last word index, and type all match a gold annotation exactly.
OTHER is the background class: gold OTHER spans act as negatives and are
excluded from precision/recall bookkeeping.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .audio import AGENT, CALLER, MaskSpan
from .corpus import CallBundle, EntityAnnotation
from .decoder import CorruptionEvent, TimedWord
from .entities import DEFAULT_SENSITIVE, EntityType
from .numwords import DEFAULT_LEXICON
from .redactor import LEAK_RECORDED, RedactionEvent
from .session import SessionOutput

Interval = tuple[float, float]


def edit_distance(ref: list[str], hyp: list[str]) -> int:
    """Minimum word edit distance (unit costs), vectorized row DP."""
    if not ref:
        return len(hyp)
    if not hyp:
        return len(ref)
    hyp_arr = np.array(hyp, dtype=object)
    prev = np.arange(len(hyp) + 1, dtype=np.int64)
    steps = np.arange(len(hyp) + 1, dtype=np.int64)
    for i, r in enumerate(ref):
        sub = prev[:-1] + (hyp_arr != r)
        dele = prev[1:] + 1
        tmp = np.empty(len(hyp) + 1, dtype=np.int64)
        tmp[0] = i + 1
        tmp[1:] = np.minimum(sub, dele)
        # insertion closure: cur[j] = min_k<=j (tmp[k] + (j-k))
        prev = np.minimum.accumulate(tmp - steps) + steps
    return int(prev[-1])


def wer(ref: list[str], hyp: list[str]) -> float:
    """(S + D + I) / max(1, |ref|); the empty-reference convention keeps
    the metric total."""
    return edit_distance(ref, hyp) / max(1, len(ref))


def align(ref: list[str], hyp: list[str]) -> list[tuple[str, int, int]]:
    """Full alignment with the deterministic tie-break: substitution is
    preferred over insertion over deletion. Returns (op, ref_idx, hyp_idx)
    with -1 for the absent side."""
    n, m = len(ref), len(hyp)
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i, j] = min(
                d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]),
                d[i, j - 1] + 1,
                d[i - 1, j] + 1,
            )
    ops: list[tuple[str, int, int]] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            ops.append(("match" if ref[i - 1] == hyp[j - 1] else "sub", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif j > 0 and d[i, j] == d[i, j - 1] + 1:
            ops.append(("ins", -1, j - 1))
            j -= 1
        else:
            ops.append(("del", i - 1, -1))
            i -= 1
    ops.reverse()
    return ops


def ser(ref_segments: list[list[str]], hyp_segments: list[list[str]]) -> float:
    """Fraction of gold entity segments whose hypothesis words differ."""
    if len(ref_segments) != len(hyp_segments):
        raise ValueError("segment lists must pair one-to-one by gold entity")
    if not ref_segments:
        return 0.0
    return sum(r != h for r, h in zip(ref_segments, hyp_segments)) / len(ref_segments)


@dataclass
class PRF:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return 1.0 if self.tp + self.fp == 0 else self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> float:
        return 1.0 if self.tp + self.fn == 0 else self.tp / (self.tp + self.fn)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)


Span = tuple[EntityType, int, int, int]  # type, channel, first word, last word


def entity_prf(predicted: list[Span], gold: list[Span]) -> dict[EntityType, PRF]:
    """Exact begin/end/type scoring; empty-denominator conventions give 1.0."""
    out = {t: PRF() for t in EntityType if t is not EntityType.OTHER}
    remaining = [g for g in gold if g[0] is not EntityType.OTHER]
    for p in predicted:
        if p[0] is EntityType.OTHER:
            continue
        if p in remaining:
            remaining.remove(p)
            out[p[0]].tp += 1
        else:
            out[p[0]].fp += 1
    for g in remaining:
        out[g[0]].fn += 1
    return out


def _union(intervals: list[Interval]) -> list[Interval]:
    merged: list[Interval] = []
    for a, b in sorted(i for i in intervals if i[1] > i[0]):
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged


def _total(intervals: list[Interval]) -> float:
    return sum(b - a for a, b in intervals)


def _intersect(a: list[Interval], b: list[Interval]) -> list[Interval]:
    out: list[Interval] = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if hi > lo:
            out.append((lo, hi))
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return out


def _subtract(a: list[Interval], b: list[Interval]) -> list[Interval]:
    out: list[Interval] = []
    for lo, hi in a:
        cur = lo
        for blo, bhi in b:
            if bhi <= cur or blo >= hi:
                continue
            if blo > cur:
                out.append((cur, blo))
            cur = max(cur, bhi)
            if cur >= hi:
                break
        if cur < hi:
            out.append((cur, hi))
    return out


def mask_coverage(
    mask_intervals: list[Interval], gold_intervals: list[Interval]
) -> tuple[float, float, list[Interval]]:
    """(coverage, over_mask_ms, uncovered gold intervals).

    Coverage is intersection over gold by duration; 1.0 by convention when
    there is no gold sensitive audio.
    """
    masks = _union(mask_intervals)
    gold = _union(gold_intervals)
    over = _total(_subtract(masks, gold))
    if not gold:
        return 1.0, over, []
    covered = _total(_intersect(masks, gold))
    uncovered = _subtract(gold, masks)
    return covered / _total(gold), over, uncovered


# ---------------------------------------------------------------------------
# whole-run evaluation


@dataclass
class LeakEvent:
    call_id: str
    cause: str
    start_ms: float
    end_ms: float
    entity_type: str

    @property
    def duration_ms(self) -> float:
        return self.end_ms - self.start_ms


@dataclass
class EvalReport:
    n_calls: int = 0
    wer_agent: float = 0.0
    wer_caller: float = 0.0
    wer_overall: float = 0.0
    ser: float = 0.0
    per_type: dict = field(default_factory=dict)  # type name -> PRF
    mask_coverage: float = 1.0
    over_mask_ms: float = 0.0
    leak_table: dict = field(default_factory=dict)  # cause -> count
    leak_events: list = field(default_factory=list)
    baseline_per_type: dict | None = None

    def to_json(self) -> dict:
        doc = {
            "n_calls": self.n_calls,
            "wer": {"agent": self.wer_agent, "caller": self.wer_caller, "overall": self.wer_overall},
            "ser": self.ser,
            "per_type": {
                t: {"precision": m.precision, "recall": m.recall, "f1": m.f1, "tp": m.tp, "fp": m.fp, "fn": m.fn}
                for t, m in sorted(self.per_type.items())
            },
            "mask_coverage": self.mask_coverage,
            "over_mask_ms": self.over_mask_ms,
            "leak_table": dict(sorted(self.leak_table.items())),
            "leak_events": [
                {"call_id": e.call_id, "cause": e.cause, "start_ms": e.start_ms, "end_ms": e.end_ms,
                 "entity_type": e.entity_type}
                for e in self.leak_events
            ],
        }
        if self.baseline_per_type is not None:
            doc["baseline_per_type"] = {
                t: {"precision": m.precision, "recall": m.recall, "f1": m.f1}
                for t, m in sorted(self.baseline_per_type.items())
            }
            doc["relative_drop_pct"] = {
                t: {
                    "precision": _relative_drop(self.per_type[t].precision, m.precision),
                    "recall": _relative_drop(self.per_type[t].recall, m.recall),
                }
                for t, m in sorted(self.baseline_per_type.items())
                if t in self.per_type
            }
        return doc

    def to_text(self) -> str:
        lines = [
            f"calls: {self.n_calls}",
            f"WER   agent {self.wer_agent:.4f}  caller {self.wer_caller:.4f}  overall {self.wer_overall:.4f}",
            f"SER   {self.ser:.4f}",
            f"mask coverage {self.mask_coverage:.4f}   over-mask {self.over_mask_ms:.0f} ms",
            "type       precision  recall     f1        tp    fp    fn",
        ]
        for t, m in sorted(self.per_type.items()):
            lines.append(
                f"{t:<10} {m.precision:<10.4f} {m.recall:<10.4f} {m.f1:<9.4f} {m.tp:<5d} {m.fp:<5d} {m.fn:<5d}"
            )
        lines.append("leaks by cause: " + (json.dumps(dict(sorted(self.leak_table.items()))) or "{}"))
        return "\n".join(lines)


def _relative_drop(system: float, baseline: float) -> float:
    if baseline == 0:
        return 0.0
    return (system - baseline) / baseline * 100.0


def gold_sensitive_intervals(
    bundle: CallBundle, sensitive: frozenset[EntityType] = DEFAULT_SENSITIVE
) -> list[Interval]:
    """Digit-bearing word intervals of sensitive gold entities (correction
    groups included), not the whole trigger-to-end window."""
    out: list[Interval] = []
    for ann in bundle.entities:
        if ann.entity_type not in sensitive:
            continue
        for w in bundle.entity_words(ann):
            if DEFAULT_LEXICON.is_number_token(w.text):
                out.append((w.start_ms, w.end_ms))
    return out


def _predicted_spans(output: SessionOutput, bundle: CallBundle) -> list[Span]:
    spans: list[Span] = []
    for ch in (AGENT, CALLER):
        starts = {w.start_ms: i for i, w in enumerate(bundle.words[ch])}
        ends = {w.end_ms: i for i, w in enumerate(bundle.words[ch])}
        for cap in output.captures:
            if cap.channel != ch:
                continue
            first = starts.get(cap.span_start_ms)
            last = ends.get(cap.span_end_ms)
            if first is None or last is None:
                spans.append((cap.entity_type, ch, -1, -1))  # unmappable: counts as FP
            else:
                spans.append((cap.entity_type, ch, first, last))
    return spans


def _gold_spans(bundle: CallBundle) -> list[Span]:
    return [(a.entity_type, a.channel, a.first_word, a.last_word) for a in bundle.entities]


def _hyp_segment(output: SessionOutput, bundle: CallBundle, ann: EntityAnnotation) -> list[str]:
    start, end = bundle.entity_time_span(ann)
    return [
        w.text
        for w in output.replay.truth[ann.channel]
        if start <= (w.start_ms + w.end_ms) / 2.0 <= end
    ]


def _first_word_corrupted(ann: EntityAnnotation, corruptions: list[CorruptionEvent]) -> bool:
    return any(
        c.channel == ann.channel and c.script_index == ann.first_word and c.kind in ("sub", "del")
        for c in corruptions
    )


def _attribute_leak(
    interval: Interval,
    bundle: CallBundle,
    output: SessionOutput,
    sensitive: frozenset[EntityType],
) -> LeakEvent:
    owner: EntityAnnotation | None = None
    for ann in bundle.entities:
        if ann.entity_type not in sensitive:
            continue
        start, end = bundle.entity_time_span(ann)
        if start <= interval[0] < end:
            owner = ann
            break
    etype = owner.entity_type.value if owner else "unknown"
    if owner is None:
        return LeakEvent(bundle.call_id, "unknown", interval[0], interval[1], etype)

    if _first_word_corrupted(owner, output.replay.corruptions):
        cause = "asr_error"
    elif any(
        ev.kind == LEAK_RECORDED
        and ev.detail.get("cause") == "latency"
        and bundle.entity_time_span(owner)[0] <= ev.time_ms
        for ev in output.events
    ):
        cause = "latency"
    elif _has_internal_pause(bundle, owner):
        cause = "hesitation"
    elif any(
        c.entity_type is owner.entity_type and not c.valid
        and c.span_start_ms >= bundle.entity_time_span(owner)[0] - 1.0
        for c in output.captures
    ):
        cause = "normalization"
    elif _agent_overlaps(bundle, owner):
        cause = "agent_interruption"
    else:
        cause = "unknown"
    return LeakEvent(bundle.call_id, cause, interval[0], interval[1], etype)


def _has_internal_pause(bundle: CallBundle, ann: EntityAnnotation, gap_ms: float = 3000.0) -> bool:
    words = bundle.entity_words(ann)
    return any(b.start_ms - a.end_ms > gap_ms for a, b in zip(words, words[1:]))


def _agent_overlaps(bundle: CallBundle, ann: EntityAnnotation) -> bool:
    start, end = bundle.entity_time_span(ann)
    return any(w.end_ms > start and w.start_ms < end for w in bundle.words[AGENT])


def evaluate_run(
    bundles: list[CallBundle],
    outputs: list[SessionOutput],
    sensitive: frozenset[EntityType] = DEFAULT_SENSITIVE,
    baseline_spans: dict[str, list[Span]] | None = None,
) -> EvalReport:
    """Score a batch of session outputs against their gold bundles."""
    by_id = {o.call_id: o for o in outputs}
    report = EvalReport(n_calls=len(bundles))
    errs = {AGENT: 0, CALLER: 0}
    refs = {AGENT: 0, CALLER: 0}
    seg_ref: list[list[str]] = []
    seg_hyp: list[list[str]] = []
    pred_spans: list[Span] = []
    gold_spans: list[Span] = []
    base_spans: list[Span] = []
    covered_w = 0.0
    gold_w = 0.0

    for call_no, bundle in enumerate(bundles):
        offset = (call_no + 1) * 1_000_000
        output = by_id[bundle.call_id]
        for ch in (AGENT, CALLER):
            ref = [w.text for w in bundle.words[ch]]
            hyp = [w.text for w in output.replay.truth[ch]]
            errs[ch] += edit_distance(ref, hyp)
            refs[ch] += len(ref)
        for ann in bundle.entities:
            if ann.entity_type is EntityType.OTHER:
                continue
            seg_ref.append([w.text for w in bundle.entity_words(ann)])
            seg_hyp.append(_hyp_segment(output, bundle, ann))

        pred_spans.extend(_offset_spans(_predicted_spans(output, bundle), offset))
        gold_spans.extend(_offset_spans(_gold_spans(bundle), offset))
        if baseline_spans is not None:
            base_spans.extend(_offset_spans(baseline_spans.get(bundle.call_id, []), offset))

        gold = gold_sensitive_intervals(bundle, sensitive)
        masks = [(s.start_ms, s.end_ms) for s in output.mask_spans if s.channel == CALLER]
        cov, over, uncovered = mask_coverage(masks, gold)
        agent_masks = [(s.start_ms, s.end_ms) for s in output.mask_spans if s.channel == AGENT]
        report.over_mask_ms += over + _total(_union(agent_masks))
        covered_w += cov * _total(_union(gold))
        gold_w += _total(_union(gold))
        for iv in uncovered:
            report.leak_events.append(_attribute_leak(iv, bundle, output, sensitive))
        for ev in output.events:
            if ev.kind == LEAK_RECORDED:
                report.leak_events.append(
                    LeakEvent(
                        bundle.call_id,
                        ev.detail["cause"],
                        ev.time_ms - ev.detail["duration_ms"],
                        ev.time_ms,
                        ev.detail.get("entity_type", "unknown"),
                    )
                )

    report.wer_agent = errs[AGENT] / max(1, refs[AGENT])
    report.wer_caller = errs[CALLER] / max(1, refs[CALLER])
    report.wer_overall = (errs[AGENT] + errs[CALLER]) / max(1, refs[AGENT] + refs[CALLER])
    report.ser = ser(seg_ref, seg_hyp)
    report.per_type = {t.value: m for t, m in entity_prf(pred_spans, gold_spans).items()}
    report.mask_coverage = covered_w / gold_w if gold_w else 1.0
    for e in report.leak_events:
        report.leak_table[e.cause] = report.leak_table.get(e.cause, 0) + 1
    if baseline_spans is not None:
        report.baseline_per_type = {t.value: m for t, m in entity_prf(base_spans, gold_spans).items()}
    return report


def _offset_spans(spans: list[Span], offset: int) -> list[Span]:
    # Word indices are per call; shift them by a per-call offset so spans
    # from different calls can never collide in exact-match scoring.
    return [
        (t, ch, first + offset, last + offset) if first >= 0 else (t, ch, -1, -1)
        for t, ch, first, last in spans
    ]
