"""Session orchestration: decoder replay, LAR transitions, hold-back audio
emission, transcript redaction and runtime metrics for one call.

The session clock is simulated event time advancing in fixed ticks, so a
given (bundle, config, seed) always produces identical outputs; the
wall-clock streaming deployment would reuse the same transition
functions. Audio that the live stream has already emitted is never
retroactively masked: a mask opening behind the emission frontier is
recorded as a latency leak instead. The masked output file carries the
full decided spans (the recording path), so leak accounting and output
masking are reported separately.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .audio import AGENT, CALLER, BeepConfig, PcmBuffer, apply_masks
from .corpus import CallBundle
from .decoder import DecoderSimConfig, ReplayResult, TimedWord, replay_decode
from .entities import DEFAULT_SENSITIVE, EntityType
from .numwords import DEFAULT_LEXICON, NumberLexicon
from .redactor import (
    CAPTURE_EMITTED,
    MASK_START,
    Classifier,
    EntityCapture,
    LiveAudioRedactor,
    RedactionEvent,
    leak_event,
)
from .vad import SegmentTimeline, SpeechSegment, VadConfig, segment as vad_segment


@dataclass(frozen=True)
class SessionConfig:
    holdback_ms: float = 500.0
    clock_tick_ms: int = 100
    sensitive: frozenset[EntityType] = DEFAULT_SENSITIVE
    decoder: DecoderSimConfig = DecoderSimConfig()
    vad: VadConfig = VadConfig()
    beep: BeepConfig = BeepConfig()
    lexicon: NumberLexicon = DEFAULT_LEXICON
    mask_agent_repeats: bool = True
    capture_timeout_ms: float = 2000.0
    nondigit_limit: int = 3
    silence_limit_ms: float = 3000.0

    def __post_init__(self) -> None:
        if self.holdback_ms < 0:
            raise ValueError("holdback_ms must be >= 0")
        if self.clock_tick_ms <= 0 or self.decoder.cadence_ms % self.clock_tick_ms:
            raise ValueError("clock_tick_ms must divide the decoder cadence")


@dataclass
class StageLatency:
    mean_ms: float = 0.0
    max_ms: float = 0.0

    @classmethod
    def of(cls, values: list[float]) -> "StageLatency":
        if not values:
            return cls()
        return cls(mean_ms=float(np.mean(values)), max_ms=float(max(values)))


@dataclass
class RuntimeMetrics:
    cpu_vs_audio: float
    cpu_time_s: float
    audio_duration_s: float
    leak_duration_ms: float
    decode_lag: StageLatency
    mask_open_lag: StageLatency
    capture_lag: StageLatency


@dataclass
class RedactedTranscript:
    tokens: list[list[str]]
    annotations: list[dict]


@dataclass
class SessionOutput:
    call_id: str
    masked_audio: PcmBuffer | None
    transcript: RedactedTranscript
    captures: list[EntityCapture]
    events: list[RedactionEvent]
    mask_spans: list
    replay: ReplayResult
    metrics: RuntimeMetrics


def measure_rtf(cpu_time_s: float, audio_duration_s: float) -> float:
    """CPU time over audio duration; < 1 means faster than real time."""
    if audio_duration_s <= 0:
        raise ValueError("audio_duration_s must be positive")
    return cpu_time_s / audio_duration_s


def _word_timeline(words: list[TimedWord], channel: int) -> SegmentTimeline:
    return SegmentTimeline([SpeechSegment(channel, w.start_ms, w.end_ms) for w in words])


def run_session(
    bundle: CallBundle,
    cfg: SessionConfig,
    classifier: Classifier,
    audio: PcmBuffer | None = None,
) -> SessionOutput:
    """Drive one call through decode, redaction and masked emission."""
    t0 = time.process_time()
    script = [bundle.words[AGENT], bundle.words[CALLER]]
    first_words = frozenset(
        (e.channel, e.first_word) for e in bundle.entities if e.entity_type is not EntityType.OTHER
    )
    replay = replay_decode(script, cfg.decoder, first_words)

    lar = LiveAudioRedactor(
        classifier,
        sensitive=cfg.sensitive,
        lexicon=cfg.lexicon,
        nondigit_limit=cfg.nondigit_limit,
        silence_limit_ms=cfg.silence_limit_ms,
        mask_agent_repeats=cfg.mask_agent_repeats,
        capture_timeout_ms=cfg.capture_timeout_ms,
    )

    if audio is not None:
        caller_segments = vad_segment(audio.samples[CALLER], cfg.vad, channel=CALLER)
        silence_clock = SegmentTimeline(caller_segments)
    else:
        # transcript-only mode: word-timing gaps stand in for VAD silence
        silence_clock = _word_timeline(script[CALLER], CALLER)

    last_emission = max((h.emission_time_ms for h in replay.hypotheses), default=0.0)
    end_time = max(bundle.duration_ms, last_emission) + cfg.silence_limit_ms + 2 * cfg.clock_tick_ms

    events: list[RedactionEvent] = []
    pending = list(replay.hypotheses)
    hyp_i = 0
    frontier = 0.0
    leak_total = 0.0
    decode_lags: list[float] = []
    mask_lags: list[float] = []
    capture_lags: list[float] = []

    now = 0.0
    while now < end_time:
        now += cfg.clock_tick_ms
        tick_events: list[RedactionEvent] = []
        while hyp_i < len(pending) and pending[hyp_i].emission_time_ms <= now:
            h = pending[hyp_i]
            hyp_i += 1
            if h.words:
                decode_lags.append(h.emission_time_ms - h.words[-1].end_ms)
            tick_events.extend(lar.on_partial(h, h.emission_time_ms))
        tick_events.extend(lar.check_entity_end(now, silence_clock.silence_at(now)))

        for ev in tick_events:
            events.append(ev)
            if ev.kind == MASK_START and ev.channel == CALLER:
                mask_lags.append(now - ev.time_ms)
                if ev.time_ms < frontier:
                    # audio before the frontier already left the engine unmasked
                    leaked = frontier - ev.time_ms
                    leak_total += leaked
                    etype = EntityType[ev.detail["entity_type"]]
                    events.append(leak_event(now, CALLER, "latency", leaked, etype))
            elif ev.kind == CAPTURE_EMITTED:
                capture_lags.append(now - ev.detail["span_end_ms"])
        frontier = max(frontier, now - cfg.holdback_ms)
    events.extend(lar.finish(end_time))

    masked_audio = apply_masks(audio, lar.mask_spans, cfg.beep) if audio is not None else None
    transcript = redact_transcript(replay.truth, lar.captures, cfg.sensitive)

    cpu = time.process_time() - t0
    duration_s = bundle.duration_ms / 1000.0
    metrics = RuntimeMetrics(
        cpu_vs_audio=measure_rtf(cpu, duration_s),
        cpu_time_s=cpu,
        audio_duration_s=duration_s,
        leak_duration_ms=leak_total,
        decode_lag=StageLatency.of(decode_lags),
        mask_open_lag=StageLatency.of(mask_lags),
        capture_lag=StageLatency.of(capture_lags),
    )
    return SessionOutput(
        call_id=bundle.call_id,
        masked_audio=masked_audio,
        transcript=transcript,
        captures=lar.captures,
        events=events,
        mask_spans=lar.mask_spans,
        replay=replay,
        metrics=metrics,
    )


def _span_indices(words: list[TimedWord], start_ms: float, end_ms: float) -> tuple[int, int] | None:
    idxs = [i for i, w in enumerate(words) if w.start_ms >= start_ms and w.end_ms <= end_ms]
    if not idxs:
        return None
    return idxs[0], idxs[-1]


def redact_transcript(
    truth: list[list[TimedWord]],
    captures: list[EntityCapture],
    sensitive: frozenset[EntityType] = DEFAULT_SENSITIVE,
) -> RedactedTranscript:
    """Replace each sensitive capture's word span with one type tag;
    non-sensitive captures stay in place but are annotated."""
    spans: list[tuple[int, int, int, EntityCapture]] = []
    for cap in captures:
        loc = _span_indices(truth[cap.channel], cap.span_start_ms, cap.span_end_ms)
        if loc is None:
            continue
        spans.append((cap.channel, loc[0], loc[1], cap))
    spans.sort(key=lambda s: (s[0], s[1]))
    for (ch1, f1, l1, _), (ch2, f2, _, _) in zip(spans, spans[1:]):
        if ch1 == ch2 and f2 <= l1:
            raise ValueError(f"overlapping capture spans on channel {ch1} at words {f2}..{l1}")

    tokens: list[list[str]] = []
    annotations: list[dict] = []
    for ch, words in enumerate(truth):
        ch_spans = {f: (l, cap) for c, f, l, cap in spans if c == ch}
        out: list[str] = []
        i = 0
        while i < len(words):
            if i in ch_spans:
                last, cap = ch_spans[i]
                masked = cap.entity_type in sensitive
                annotations.append(
                    {
                        "channel": ch,
                        "first_word": i,
                        "last_word": last,
                        "entity_type": cap.entity_type.value,
                        "masked": masked,
                    }
                )
                if masked:
                    out.append(f"<{cap.entity_type.value}>")
                else:
                    out.extend(w.text for w in words[i : last + 1])
                i = last + 1
            else:
                out.append(words[i].text)
                i += 1
        tokens.append(out)
    return RedactedTranscript(tokens, annotations)
