"""Live audio redactor: the per-session state machine.

Consumes merged partial hypotheses plus a caller-silence clock. A caller
number token while idle queries the classifier; sensitive predictions
open a mask at the trigger word's start, non-sensitive (but typed)
predictions track without masking, OTHER holds the trigger closed until
the current number phrase ends. An entity ends at the third consecutive
caller non-digit word or after more than three seconds of caller
silence; the mask then closes, and the entity's stabilized words are
normalized into a capture.

Masking is monotone: retractions in later partials never close an open
mask early, and the predicted type is frozen at trigger time so the mask
cannot flip off mid-entity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .audio import AGENT, CALLER, MaskSpan
from .decoder import PartialHypothesis, TimedWord, hyp_diff
from .entities import DEFAULT_SENSITIVE, EntityType
from .nlu import DialogState
from .numwords import (
    DEFAULT_LEXICON,
    CanonicalValue,
    EmptyValueError,
    NumberLexicon,
    words_to_digits,
)

IDLE, MASKING, TRACKING = "IDLE", "MASKING", "TRACKING"

MASK_START = "MaskStart"
MASK_END = "MaskEnd"
CAPTURE_EMITTED = "CaptureEmitted"
LEAK_RECORDED = "LeakRecorded"

LEAK_CAUSES = ("asr_error", "normalization", "hesitation", "agent_interruption", "latency", "unknown")


class Classifier(Protocol):
    def classify(
        self, trigger_word: TimedWord, history: tuple[str, ...], dialog: DialogState
    ) -> tuple[EntityType, np.ndarray]: ...


@dataclass(frozen=True)
class RedactionEvent:
    kind: str
    time_ms: float
    channel: int
    detail: dict


@dataclass(frozen=True)
class EntityCapture:
    entity_type: EntityType
    canonical: CanonicalValue | None
    channel: int
    span_start_ms: float
    span_end_ms: float
    words: tuple[str, ...]
    valid: bool


def leak_event(
    time_ms: float, channel: int, cause: str, duration_ms: float, entity_type: EntityType | None = None
) -> RedactionEvent:
    if cause not in LEAK_CAUSES:
        raise ValueError(f"unknown leak cause {cause!r}")
    detail = {"cause": cause, "duration_ms": duration_ms}
    if entity_type is not None:
        detail["entity_type"] = entity_type.value
    return RedactionEvent(LEAK_RECORDED, time_ms, channel, detail)


@dataclass
class LarState:
    phase: str = IDLE
    entity_type: EntityType | None = None
    entity_words: list[TimedWord] = field(default_factory=list)
    nondigit_run: int = 0
    last_digit_end_ms: float = 0.0
    mask_open_ms: float | None = None
    other_hold: bool = False


@dataclass
class _PendingCapture:
    entity_type: EntityType
    span_start_ms: float
    span_end_ms: float
    decided_at_ms: float
    masked: bool


class LiveAudioRedactor:
    """One instance per session; all transitions happen on a single
    ordered stream of hypotheses and clock ticks."""

    def __init__(
        self,
        classifier: Classifier,
        sensitive: frozenset[EntityType] = DEFAULT_SENSITIVE,
        lexicon: NumberLexicon = DEFAULT_LEXICON,
        nondigit_limit: int = 3,
        silence_limit_ms: float = 3000.0,
        mask_agent_repeats: bool = True,
        capture_timeout_ms: float = 2000.0,
        history_len: int = 20,
    ):
        self.classifier = classifier
        self.sensitive = sensitive
        self.lexicon = lexicon
        self.nondigit_limit = nondigit_limit
        self.silence_limit_ms = silence_limit_ms
        self.mask_agent_repeats = mask_agent_repeats
        self.capture_timeout_ms = capture_timeout_ms
        self.history_len = history_len

        self.state = LarState()
        self.captures: list[EntityCapture] = []
        self.mask_spans: list[MaskSpan] = []
        self.detected: set[EntityType] = set()
        self._current_hyp: dict[int, PartialHypothesis | None] = {AGENT: None, CALLER: None}
        self._seen_starts: dict[int, set[float]] = {AGENT: set(), CALLER: set()}
        self._agent_mask_open: float | None = None
        self._pending: list[_PendingCapture] = []
        self._last_mask_kind: dict[int, str] = {}
        self._trigger_word: TimedWord | None = None
        self._last_num_word: TimedWord | None = None

    # -- event plumbing ----------------------------------------------------

    def _mask_event(self, kind: str, time_ms: float, channel: int, detail: dict) -> RedactionEvent:
        prev = self._last_mask_kind.get(channel)
        if (kind == MASK_START) == (prev == MASK_START):
            raise RuntimeError(f"mask events must alternate on channel {channel}")
        self._last_mask_kind[channel] = kind
        return RedactionEvent(kind, time_ms, channel, detail)

    # -- word stream -------------------------------------------------------

    def on_partial(self, hyp: PartialHypothesis, now_ms: float) -> list[RedactionEvent]:
        """Process one decoder emission. Words are acted on at first
        appearance; later text revisions update captures but never re-fire
        triggers or close masks."""
        events: list[RedactionEvent] = []
        prev = self._current_hyp[hyp.channel]
        if prev is not None:
            hyp_diff(prev, hyp)  # enforces the decoder contract
        self._current_hyp[hyp.channel] = hyp
        self._flush_pending(now_ms, events)
        seen = self._seen_starts[hyp.channel]
        for w in hyp.words:
            if w.start_ms in seen:
                continue
            seen.add(w.start_ms)
            self._process_word(w, now_ms, events)
        self._flush_pending(now_ms, events)
        return events

    def _process_word(self, w: TimedWord, now_ms: float, events: list[RedactionEvent]) -> None:
        st = self.state
        if w.channel == AGENT:
            if (
                st.phase == MASKING
                and self.mask_agent_repeats
                and self.lexicon.is_number_token(w.text)
                and self._agent_mask_open is None
            ):
                self._agent_mask_open = w.start_ms
                events.append(
                    self._mask_event(MASK_START, w.start_ms, AGENT, {"entity_type": st.entity_type.value, "repeat": True})
                )
            return

        entity_open = st.phase in (MASKING, TRACKING) or st.other_hold
        if entity_open:
            st.entity_words.append(w)
            if self.lexicon.is_number_token(w.text):
                st.nondigit_run = 0
                st.last_digit_end_ms = w.end_ms
                self._last_num_word = w
            else:
                st.nondigit_run += 1
                if st.nondigit_run >= self.nondigit_limit:
                    self._end_entity(now_ms, events)
            return

        if st.phase == IDLE and self.lexicon.is_trigger_token(w.text):
            self._trigger(w, now_ms, events)

    def _trigger(self, w: TimedWord, now_ms: float, events: list[RedactionEvent]) -> None:
        st = self.state
        history = self._history_before(w)
        dialog = DialogState.at(w.start_ms, frozenset(self.detected))
        etype, _probs = self.classifier.classify(w, history, dialog)
        st.entity_words = [w]
        st.nondigit_run = 0
        st.last_digit_end_ms = w.end_ms
        self._trigger_word = w
        self._last_num_word = w
        if etype is EntityType.OTHER:
            # Hold further triggers until this number phrase ends; a fresh
            # digit only re-queries after an end-of-entity reset.
            st.other_hold = True
            return
        st.entity_type = etype
        if etype in self.sensitive:
            st.phase = MASKING
            st.mask_open_ms = w.start_ms
            events.append(self._mask_event(MASK_START, w.start_ms, CALLER, {"entity_type": etype.value}))
        else:
            st.phase = TRACKING

    def _history_before(self, w: TimedWord) -> tuple[str, ...]:
        pool: list[TimedWord] = []
        for ch in (AGENT, CALLER):
            hyp = self._current_hyp[ch]
            if hyp is not None:
                pool.extend(t for t in hyp.words if t.end_ms <= w.start_ms)
        pool.sort(key=lambda t: (t.end_ms, t.channel))
        return tuple(t.text for t in pool[-self.history_len :])

    # -- end-of-entity -----------------------------------------------------

    def check_entity_end(self, now_ms: float, silence_ms: float) -> list[RedactionEvent]:
        """Clock-tick hook: close the entity after >3 s of caller silence,
        and let pending captures hit their stability timeout."""
        events: list[RedactionEvent] = []
        st = self.state
        if (st.phase in (MASKING, TRACKING) or st.other_hold) and silence_ms > self.silence_limit_ms:
            self._end_entity(now_ms, events)
        self._flush_pending(now_ms, events)
        return events

    def _end_entity(self, now_ms: float, events: list[RedactionEvent]) -> None:
        st = self.state
        if st.other_hold:
            st.other_hold = False
            st.entity_words = []
            st.nondigit_run = 0
            return
        masked = st.phase == MASKING
        if masked:
            events.append(self._mask_event(MASK_END, now_ms, CALLER, {"entity_type": st.entity_type.value}))
            self.mask_spans.append(MaskSpan(CALLER, st.mask_open_ms, now_ms, cause=st.entity_type.value))
            if self._agent_mask_open is not None:
                events.append(self._mask_event(MASK_END, now_ms, AGENT, {"entity_type": st.entity_type.value, "repeat": True}))
                self.mask_spans.append(MaskSpan(AGENT, self._agent_mask_open, now_ms, cause=st.entity_type.value))
                self._agent_mask_open = None
        span_start = self._trigger_word.start_ms
        span_end = (self._last_num_word or self._trigger_word).end_ms
        self._pending.append(_PendingCapture(st.entity_type, span_start, span_end, now_ms, masked))
        st.phase = IDLE
        st.entity_type = None
        st.entity_words = []
        st.nondigit_run = 0
        st.mask_open_ms = None
        self._trigger_word = None
        self._last_num_word = None

    # -- capture -----------------------------------------------------------

    def _stable_covers(self, hyp: PartialHypothesis | None, end_ms: float) -> bool:
        if hyp is None:
            return False
        if hyp.is_final:
            return True
        stable = hyp.words[: hyp.stable_prefix_len]
        return bool(stable) and stable[-1].end_ms >= end_ms

    def _flush_pending(self, now_ms: float, events: list[RedactionEvent], force: bool = False) -> None:
        hyp = self._current_hyp[CALLER]
        remaining: list[_PendingCapture] = []
        for p in self._pending:
            timed_out = now_ms - p.decided_at_ms >= self.capture_timeout_ms
            if force or timed_out or self._stable_covers(hyp, p.span_end_ms):
                self._capture(p, now_ms, events)
            else:
                remaining.append(p)
        self._pending = remaining

    def _capture(self, p: _PendingCapture, now_ms: float, events: list[RedactionEvent]) -> None:
        hyp = self._current_hyp[CALLER]
        span_words = tuple(
            w for w in (hyp.words if hyp else ()) if p.span_start_ms <= w.start_ms and w.end_ms <= p.span_end_ms
        )
        texts = tuple(w.text for w in span_words)
        try:
            canonical = words_to_digits(list(texts), p.entity_type, self.lexicon)
            valid = canonical.valid
            detail: dict = {"entity_type": p.entity_type.value, "valid": valid}
        except EmptyValueError as exc:
            canonical = None
            valid = False
            detail = {"entity_type": p.entity_type.value, "valid": False, "diagnostic": str(exc)}
        capture = EntityCapture(
            p.entity_type, canonical, CALLER, p.span_start_ms, p.span_end_ms, texts, valid
        )
        self.captures.append(capture)
        self.detected.add(p.entity_type)
        detail["span_start_ms"] = p.span_start_ms
        detail["span_end_ms"] = p.span_end_ms
        events.append(RedactionEvent(CAPTURE_EMITTED, now_ms, CALLER, detail))

    # -- session end -------------------------------------------------------

    def finish(self, now_ms: float) -> list[RedactionEvent]:
        """Force-close any open entity and flush pending captures."""
        events: list[RedactionEvent] = []
        st = self.state
        if st.phase in (MASKING, TRACKING) or st.other_hold:
            self._end_entity(now_ms, events)
        self._flush_pending(now_ms, events, force=True)
        return events
