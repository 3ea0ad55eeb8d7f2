from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from liveredact.audio import AGENT, CALLER, PcmBuffer
from liveredact.corpus import CallBundle, EntityAnnotation, render_call_audio
from liveredact.decoder import DecoderSimConfig, TimedWord
from liveredact.entities import EntityType
from liveredact.nlu import OracleClassifier
from liveredact.redactor import CAPTURE_EMITTED, LEAK_RECORDED, MASK_END, MASK_START, EntityCapture
from liveredact.session import SessionConfig, measure_rtf, redact_transcript, run_session

ET = EntityType


def _bundle_one_cc(prefix_words=("sure", "its"), suffix=("did", "you", "get", "that")):
    agent = []
    t = 500.0
    for tok in ["can", "i", "have", "your", "card", "number"]:
        agent.append(TimedWord(tok, t, t + 350.0, AGENT))
        t += 500.0
    caller = []
    t += 1000.0
    for tok in prefix_words:
        caller.append(TimedWord(tok, t, t + 300.0, CALLER))
        t += 450.0
    digits = "four two four two four two four two four two four two four two four two".split()
    first_idx = len(caller)
    for tok in digits:
        caller.append(TimedWord(tok, t, t + 320.0, CALLER))
        t += 470.0
    last_idx = len(caller) - 1
    for tok in suffix:
        caller.append(TimedWord(tok, t, t + 300.0, CALLER))
        t += 450.0
    return CallBundle(
        call_id="t-cc",
        duration_ms=t + 5000.0,
        words=[agent, caller],
        entities=[EntityAnnotation(ET.CCNUM, CALLER, first_idx, last_idx, "4242424242424242")],
        seed=5,
    )


def _bundle_no_digits():
    agent = [TimedWord(t, 500.0 + i * 500.0, 800.0 + i * 500.0, AGENT) for i, t in enumerate(["hello", "there"])]
    caller = [TimedWord(t, 3000.0 + i * 500.0, 3300.0 + i * 500.0, CALLER) for i, t in enumerate(["hi", "yes"])]
    return CallBundle("t-none", 9000.0, [agent, caller], [], seed=1)


def _cfg(**kw):
    dec = kw.pop("decoder", DecoderSimConfig(revision_prob=0.0, seed=3))
    return SessionConfig(decoder=dec, **kw)


def _oracle(bundle):
    return OracleClassifier(bundle.gold_spans())


def test_no_digit_call_is_passthrough():
    bundle = _bundle_no_digits()
    audio = render_call_audio(bundle)
    out = run_session(bundle, _cfg(), _oracle(bundle), audio=audio)
    assert out.events == []
    assert out.captures == []
    assert np.array_equal(out.masked_audio.samples, audio.samples)
    assert out.metrics.leak_duration_ms == 0.0


def test_single_cc_masked_fully_with_default_holdback():
    bundle = _bundle_one_cc()
    out = run_session(bundle, _cfg(), _oracle(bundle))
    kinds = [e.kind for e in out.events if e.kind in (MASK_START, MASK_END)]
    assert kinds == [MASK_START, MASK_END]
    (span,) = out.mask_spans
    start, end = bundle.entity_time_span(bundle.entities[0])
    assert span.start_ms == start
    assert span.end_ms >= end  # trailing words stay masked until the decision
    (cap,) = out.captures
    assert cap.canonical.value == "4242424242424242"


def test_zero_holdback_leaks_and_is_tagged_latency():
    bundle = _bundle_one_cc()
    out = run_session(bundle, _cfg(holdback_ms=0.0), _oracle(bundle))
    assert out.metrics.leak_duration_ms > 0
    leaks = [e for e in out.events if e.kind == LEAK_RECORDED]
    assert leaks and all(e.detail["cause"] == "latency" for e in leaks)


def test_session_determinism():
    bundle = _bundle_one_cc()
    a = run_session(bundle, _cfg(), _oracle(bundle))
    b = run_session(bundle, _cfg(), _oracle(bundle))
    assert a.events == b.events
    assert a.captures == b.captures
    assert a.mask_spans == b.mask_spans
    assert a.transcript.tokens == b.transcript.tokens


def test_audio_conservation_outside_masks():
    bundle = _bundle_one_cc()
    audio = render_call_audio(bundle)
    out = run_session(bundle, _cfg(), _oracle(bundle), audio=audio)
    assert out.masked_audio.n_samples == audio.n_samples
    (span,) = out.mask_spans
    a = int(span.start_ms * 8)
    b = int(span.end_ms * 8)
    assert np.array_equal(out.masked_audio.samples[CALLER, : a - 8], audio.samples[CALLER, : a - 8])
    assert np.array_equal(out.masked_audio.samples[CALLER, b + 8 :], audio.samples[CALLER, b + 8 :])
    assert np.array_equal(out.masked_audio.samples[AGENT], audio.samples[AGENT])


def test_every_mask_span_has_event_pair():
    bundle = _bundle_one_cc()
    out = run_session(bundle, _cfg(), _oracle(bundle))
    starts = [e for e in out.events if e.kind == MASK_START]
    ends = [e for e in out.events if e.kind == MASK_END]
    assert len(starts) == len(ends) == len(out.mask_spans)
    for span, s_ev, e_ev in zip(out.mask_spans, starts, ends):
        assert span.start_ms == s_ev.time_ms
        assert span.end_ms == e_ev.time_ms


def test_vad_clock_matches_word_clock_behavior():
    bundle = _bundle_one_cc(suffix=())  # entity must close on the silence rule
    audio = render_call_audio(bundle)
    with_audio = run_session(bundle, _cfg(), _oracle(bundle), audio=audio)
    without = run_session(bundle, _cfg(), _oracle(bundle))
    assert len(with_audio.captures) == len(without.captures) == 1
    assert with_audio.captures[0].canonical.value == without.captures[0].canonical.value


def test_concurrent_sessions_match_sequential():
    bundles = [_bundle_one_cc(), _bundle_no_digits()]
    cfg = _cfg()
    sequential = [run_session(b, cfg, _oracle(b)) for b in bundles]
    with ThreadPoolExecutor(4) as pool:
        futures = [pool.submit(run_session, b, cfg, _oracle(b)) for b in bundles for _ in range(3)]
        results = [f.result() for f in futures]
    for j, r in enumerate(results):
        ref = sequential[j // 3]
        assert r.events == ref.events and r.captures == ref.captures


def test_redact_transcript_tags_and_annotations():
    words = [
        [],
        [TimedWord(t, 100.0 * i, 100.0 * i + 80.0, CALLER) for i, t in enumerate(["its", "four", "two", "ok"])],
    ]
    cap = EntityCapture(ET.CCNUM, None, CALLER, 100.0, 280.0, ("four", "two"), True)
    out = redact_transcript(words, [cap])
    assert out.tokens[CALLER] == ["its", "<CCNUM>", "ok"]
    assert out.annotations[0]["masked"] is True

    zipcap = EntityCapture(ET.ZIP, None, CALLER, 100.0, 280.0, ("four", "two"), True)
    out = redact_transcript(words, [zipcap])
    assert out.tokens[CALLER] == ["its", "four", "two", "ok"]
    assert out.annotations[0]["masked"] is False

    assert redact_transcript(words, []).tokens[CALLER] == ["its", "four", "two", "ok"]


def test_redact_transcript_rejects_overlaps():
    words = [
        [],
        [TimedWord(t, 100.0 * i, 100.0 * i + 80.0, CALLER) for i, t in enumerate(["a", "b", "c"])],
    ]
    caps = [
        EntityCapture(ET.CCNUM, None, CALLER, 0.0, 180.0, ("a", "b"), True),
        EntityCapture(ET.CVV, None, CALLER, 100.0, 280.0, ("b", "c"), True),
    ]
    with pytest.raises(ValueError, match="overlap"):
        redact_transcript(words, caps)


def test_measure_rtf():
    assert measure_rtf(2.0, 100.0) == pytest.approx(0.02)
    assert measure_rtf(0.0, 10.0) == 0.0
    with pytest.raises(ValueError):
        measure_rtf(1.0, 0.0)


def test_tick_must_divide_cadence():
    with pytest.raises(ValueError):
        SessionConfig(clock_tick_ms=90)
