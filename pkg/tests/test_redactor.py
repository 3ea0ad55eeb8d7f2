import numpy as np
import pytest

from liveredact.audio import AGENT, CALLER
from liveredact.decoder import PartialHypothesis, TimedWord
from liveredact.entities import EntityType
from liveredact.nlu import DialogState
from liveredact.redactor import (
    CAPTURE_EMITTED,
    IDLE,
    LEAK_RECORDED,
    MASK_END,
    MASK_START,
    MASKING,
    TRACKING,
    LiveAudioRedactor,
    leak_event,
)

ET = EntityType


class FixedClassifier:
    """Returns a scripted type per trigger text; counts queries."""

    def __init__(self, mapping, default=ET.OTHER):
        self.mapping = mapping
        self.default = default
        self.calls = []

    def classify(self, trigger_word, history, dialog):
        self.calls.append(trigger_word.text)
        label = self.mapping.get(trigger_word.text, self.default)
        probs = np.zeros(len(ET))
        probs[list(ET).index(label)] = 1.0
        return label, probs


def _words(tokens, start=1000.0, dur=300.0, gap=100.0, channel=CALLER):
    out = []
    t = start
    for tok in tokens:
        out.append(TimedWord(tok, t, t + dur, channel))
        t += dur + gap
    return out


def _final(words, t, channel=CALLER):
    return PartialHypothesis(channel, t, tuple(words), len(words), is_final=True)


def _drive(lar, words, t0=5000.0, channel=CALLER):
    """Feed words one at a time as growing final hypotheses."""
    events = []
    for n in range(1, len(words) + 1):
        events.extend(lar.on_partial(_final(words[:n], t0 + 300.0 * n, channel), t0 + 300.0 * n))
    return events


def test_sensitive_trigger_opens_mask_at_word_start():
    clf = FixedClassifier({"four": ET.CCNUM})
    lar = LiveAudioRedactor(clf)
    words = _words(["four", "two"])
    events = _drive(lar, words)
    starts = [e for e in events if e.kind == MASK_START]
    assert len(starts) == 1
    assert starts[0].time_ms == words[0].start_ms
    assert starts[0].channel == CALLER
    assert lar.state.phase == MASKING


def test_nonsensitive_type_tracks_without_mask():
    clf = FixedClassifier({"nine": ET.ZIP})
    lar = LiveAudioRedactor(clf)
    events = _drive(lar, _words(["nine", "one"]))
    assert [e for e in events if e.kind == MASK_START] == []
    assert lar.state.phase == TRACKING


def test_agent_words_do_not_trigger():
    clf = FixedClassifier({"four": ET.CCNUM})
    lar = LiveAudioRedactor(clf)
    events = _drive(lar, _words(["four", "two"], channel=AGENT), channel=AGENT)
    assert events == []
    assert lar.state.phase == IDLE
    assert clf.calls == []


def test_two_nondigit_words_keep_entity_open_three_close_it():
    clf = FixedClassifier({"four": ET.CCNUM})
    lar = LiveAudioRedactor(clf)
    words = _words(["four", "two", "thank", "you"])
    _drive(lar, words)
    assert lar.state.phase == MASKING  # two non-digits: still open
    more = words + _words(["so"], start=words[-1].end_ms + 100.0)
    ev = lar.on_partial(_final(more, 9000.0), 9000.0)
    assert lar.state.phase == IDLE  # third consecutive non-digit closes
    assert [e.kind for e in ev if e.kind in (MASK_END,)] == [MASK_END]


def test_digit_resets_nondigit_run():
    clf = FixedClassifier({"four": ET.CCNUM})
    lar = LiveAudioRedactor(clf)
    words = _words(["four", "thank", "you", "two", "thank", "you"])
    _drive(lar, words)
    assert lar.state.phase == MASKING
    assert lar.state.nondigit_run == 2


def test_silence_boundary_2999_open_3001_closed():
    def run(silence):
        clf = FixedClassifier({"four": ET.CCNUM})
        lar = LiveAudioRedactor(clf)
        _drive(lar, _words(["four", "two"]))
        lar.check_entity_end(20000.0, silence)
        return lar.state.phase

    assert run(2999.0) == MASKING
    assert run(3000.0) == MASKING  # rule is strictly more than 3 s
    assert run(3001.0) == IDLE


def test_mask_events_alternate_and_span_recorded():
    clf = FixedClassifier({"four": ET.CCNUM})
    lar = LiveAudioRedactor(clf)
    words = _words(["four", "two", "one"])
    events = _drive(lar, words)
    events += lar.check_entity_end(20000.0, 5000.0)
    kinds = [e.kind for e in events if e.kind in (MASK_START, MASK_END)]
    assert kinds == [MASK_START, MASK_END]
    (span,) = lar.mask_spans
    assert span.channel == CALLER
    assert span.start_ms == words[0].start_ms
    assert span.end_ms == 20000.0
    assert span.cause == "CCNUM"


def test_capture_normalizes_span_and_sets_detected_bit():
    clf = FixedClassifier({"four": ET.CCNUM})
    lar = LiveAudioRedactor(clf)
    words = _words(["four", "two"] * 8)
    events = _drive(lar, words)
    events += lar.check_entity_end(30000.0, 5000.0)
    caps = [e for e in events if e.kind == CAPTURE_EMITTED]
    assert len(caps) == 1
    (cap,) = lar.captures
    assert cap.canonical.value == "4242424242424242"
    assert cap.valid
    assert cap.span_start_ms == words[0].start_ms
    assert cap.span_end_ms == words[-1].end_ms
    assert ET.CCNUM in lar.detected


def test_expdate_correction_capture():
    clf = FixedClassifier({"february": ET.EXPDATE})
    lar = LiveAudioRedactor(clf)
    words = _words("february no no january twenty twenty five".split())
    _drive(lar, words)
    lar.check_entity_end(30000.0, 5000.0)
    (cap,) = lar.captures
    assert cap.entity_type is ET.EXPDATE
    assert cap.canonical.value == "01/25"


def test_other_holds_trigger_until_entity_end_reset():
    clf = FixedClassifier({"three": ET.OTHER, "four": ET.CCNUM})
    lar = LiveAudioRedactor(clf)
    words = _words(["three", "four"])  # "four" arrives inside the held phrase
    _drive(lar, words)
    assert clf.calls == ["three"]  # no re-query mid-phrase
    assert lar.state.phase == IDLE and lar.state.other_hold
    lar.check_entity_end(20000.0, 4000.0)  # silence resets the hold
    assert not lar.state.other_hold
    more = _words(["four", "two"], start=25000.0)
    lar.on_partial(_final(words + more, 26000.0), 26000.0)
    assert clf.calls == ["three", "four"]
    assert lar.state.phase == MASKING


def test_retraction_never_closes_open_mask():
    clf = FixedClassifier({"five": ET.CVV})
    lar = LiveAudioRedactor(clf)
    w_five = TimedWord("five", 1000.0, 1300.0, CALLER)
    h1 = PartialHypothesis(CALLER, 2000.0, (w_five,), 0)
    lar.on_partial(h1, 2000.0)
    assert lar.state.phase == MASKING
    retracted = PartialHypothesis(CALLER, 2300.0, (TimedWord("fine", 1000.0, 1300.0, CALLER),), 0)
    lar.on_partial(retracted, 2300.0)
    assert lar.state.phase == MASKING  # conservative: mask stays open


def test_zero_digit_span_after_retraction_gives_invalid_capture():
    clf = FixedClassifier({"five": ET.CVV})
    lar = LiveAudioRedactor(clf)
    w_five = TimedWord("five", 1000.0, 1300.0, CALLER)
    lar.on_partial(PartialHypothesis(CALLER, 2000.0, (w_five,), 0), 2000.0)
    corrected = TimedWord("fine", 1000.0, 1300.0, CALLER)
    lar.on_partial(PartialHypothesis(CALLER, 2300.0, (corrected,), 1, is_final=True), 2300.0)
    events = lar.check_entity_end(9000.0, 5000.0)
    caps = [e for e in events if e.kind == CAPTURE_EMITTED]
    assert len(caps) == 1
    assert caps[0].detail["valid"] is False
    (cap,) = lar.captures
    assert cap.canonical is None and not cap.valid


def test_capture_waits_for_stability_then_times_out():
    clf = FixedClassifier({"five": ET.CVV})
    lar = LiveAudioRedactor(clf)
    words = _words(["five", "one", "two"])
    # unstable tail: stable prefix stays at 1
    h = PartialHypothesis(CALLER, 3000.0, tuple(words), 1)
    lar.on_partial(h, 3000.0)
    ev = lar.check_entity_end(7000.0, 3500.0)
    assert not [e for e in ev if e.kind == CAPTURE_EMITTED]  # waiting on stability
    ev = lar.check_entity_end(7100.0 + lar.capture_timeout_ms, 3600.0)
    assert [e for e in ev if e.kind == CAPTURE_EMITTED]
    assert lar.captures[0].canonical.value == "512"


def test_agent_repeat_masking_while_caller_masked():
    clf = FixedClassifier({"four": ET.CCNUM})
    lar = LiveAudioRedactor(clf)
    caller = _words(["four", "two", "one", "seven"])
    _drive(lar, caller)
    agent = _words(["four", "two"], start=3000.0, channel=AGENT)
    lar.on_partial(_final(agent, 8000.0, channel=AGENT), 8000.0)
    events = lar.check_entity_end(20000.0, 5000.0)
    agent_spans = [s for s in lar.mask_spans if s.channel == AGENT]
    assert len(agent_spans) == 1
    assert agent_spans[0].start_ms == agent[0].start_ms
    kinds = [(e.kind, e.channel) for e in events if e.kind == MASK_END]
    assert (MASK_END, AGENT) in kinds and (MASK_END, CALLER) in kinds


def test_agent_repeat_masking_can_be_disabled():
    clf = FixedClassifier({"four": ET.CCNUM})
    lar = LiveAudioRedactor(clf, mask_agent_repeats=False)
    _drive(lar, _words(["four", "two"]))
    agent = _words(["four"], start=3000.0, channel=AGENT)
    lar.on_partial(_final(agent, 8000.0, channel=AGENT), 8000.0)
    lar.check_entity_end(20000.0, 5000.0)
    assert [s for s in lar.mask_spans if s.channel == AGENT] == []


def test_history_merges_channels_in_end_time_order():
    captured = {}

    class Spy:
        def classify(self, trigger_word, history, dialog):
            captured["history"] = history
            probs = np.zeros(len(ET)); probs[-1] = 1.0
            return ET.OTHER, probs

    lar = LiveAudioRedactor(Spy())
    agent = _words(["card", "number"], start=100.0, channel=AGENT)
    caller_pre = _words(["its"], start=1200.0)
    trigger = _words(["four"], start=2000.0)
    lar.on_partial(_final(agent, 1500.0, channel=AGENT), 1500.0)
    lar.on_partial(_final(caller_pre + trigger, 3000.0), 3000.0)
    assert captured["history"] == ("card", "number", "its")


def test_finish_flushes_open_entity():
    clf = FixedClassifier({"four": ET.CCNUM})
    lar = LiveAudioRedactor(clf)
    _drive(lar, _words(["four", "two"]))
    events = lar.finish(60000.0)
    assert [e.kind for e in events] == [MASK_END, CAPTURE_EMITTED]
    assert lar.state.phase == IDLE


def test_leak_event_validates_cause():
    ev = leak_event(1000.0, CALLER, "latency", 250.0, ET.CCNUM)
    assert ev.kind == LEAK_RECORDED and ev.detail["cause"] == "latency"
    with pytest.raises(ValueError):
        leak_event(0.0, CALLER, "gremlins", 1.0)
