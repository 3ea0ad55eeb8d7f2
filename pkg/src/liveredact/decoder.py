"""Deterministic replay decoder: scripted transcripts to partial-hypothesis streams.

Stands in for the live per-channel ASR decoders behind a pluggable
contract. Recognition errors are sampled once at script load into a
stable "corrupted truth", so every partial is consistent with the final
hypotheses and evaluation against gold stays well-defined. Tail words may
first surface as confusion-list substitutes before correcting, which
exercises consumers of unstable hypotheses.
"""

from __future__ import annotations

import random
from bisect import bisect_right
from dataclasses import dataclass, field, replace

AGENT, CALLER = 0, 1

DIGIT_WORDS = frozenset(
    ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "oh", "o"]
)

# Every digit word confuses to a non-digit token, so "entity start digit
# misrecognized as a non-digit" leaks are reachable by the error model.
CONFUSIONS: dict[str, list[str]] = {
    "zero": ["hero"],
    "oh": ["owe"],
    "o": ["owe"],
    "one": ["won"],
    "two": ["to", "too"],
    "three": ["free", "tree"],
    "four": ["for", "fore"],
    "five": ["fine", "hive"],
    "six": ["sick"],
    "seven": ["heaven"],
    "eight": ["ate", "hate"],
    "nine": ["line", "wine"],
    "ten": ["tan"],
    "twenty": ["plenty"],
    "thirty": ["thirsty"],
    "forty": ["fourteen"],
    "fifty": ["fifteen"],
    "double": ["trouble"],
}

_FALLBACK_SUBS = ["the", "a", "and", "that", "it", "so", "uh", "um"]
_INSERT_VOCAB = ["uh", "um", "yeah", "the", "like"]


class DecoderContractError(RuntimeError):
    """A hypothesis contradicted the stable prefix of its predecessor."""


class ScriptFormatError(ValueError):
    """Invalid replay script (unsorted or overlapping words)."""


@dataclass(frozen=True)
class TimedWord:
    text: str
    start_ms: float
    end_ms: float
    channel: int

    def __post_init__(self) -> None:
        if not self.start_ms < self.end_ms:
            raise ValueError(f"word {self.text!r} has empty time span")


@dataclass(frozen=True)
class PartialHypothesis:
    channel: int
    emission_time_ms: float
    words: tuple[TimedWord, ...]
    stable_prefix_len: int
    is_final: bool = False

    def __post_init__(self) -> None:
        if self.stable_prefix_len > len(self.words):
            raise ValueError("stable prefix longer than hypothesis")
        if self.is_final and self.stable_prefix_len != len(self.words):
            raise ValueError("final hypothesis must be fully stable")


@dataclass(frozen=True)
class ErrorRates:
    substitution: float = 0.0
    deletion: float = 0.0
    insertion: float = 0.0

    def __post_init__(self) -> None:
        for r in (self.substitution, self.deletion, self.insertion):
            if not 0.0 <= r <= 1.0:
                raise ValueError("error rates must lie in [0, 1]")


@dataclass(frozen=True)
class ErrorModel:
    digit: ErrorRates = ErrorRates()
    nondigit: ErrorRates = ErrorRates()
    # Targeted knob for leak-cause experiments: substitution applied to the
    # first word of annotated entity spans, always with a non-digit token.
    first_entity_digit_sub: float = 0.0


@dataclass(frozen=True)
class DecoderSimConfig:
    cadence_ms: int = 300
    latency_ms: int = 200
    instability_tail: int = 2
    revision_prob: float = 0.1
    error_model: ErrorModel = ErrorModel()
    seed: int = 0

    def __post_init__(self) -> None:
        if self.cadence_ms <= 0:
            raise ValueError("cadence_ms must be positive")
        if not 0.0 <= self.revision_prob <= 1.0:
            raise ValueError("revision_prob must lie in [0, 1]")


@dataclass(frozen=True)
class CorruptionEvent:
    channel: int
    script_index: int  # for insertions: index of the preceding script word
    kind: str  # sub | del | ins
    original: str
    replacement: str


@dataclass
class ReplayResult:
    hypotheses: list[PartialHypothesis]
    truth: list[list[TimedWord]]  # corrupted truth per channel
    origins: list[list[int | None]]  # truth index -> script index (None = insertion)
    corruptions: list[CorruptionEvent]

    def finals(self, channel: int) -> list[TimedWord]:
        out: list[TimedWord] = []
        for h in self.hypotheses:
            if h.channel == channel and h.is_final:
                out.extend(h.words)
        return out


def confuse(word: str, rng: random.Random, nondigit_only: bool = False) -> str:
    """Pick a deterministic confusion substitute different from *word*."""
    pool = CONFUSIONS.get(word)
    if pool is None or (nondigit_only and all(p in DIGIT_WORDS for p in pool)):
        pool = [w for w in _FALLBACK_SUBS if w != word]
    return rng.choice(pool)


def _validate_channel(words: list[TimedWord], channel: int) -> None:
    prev_end = -1.0
    for w in words:
        if w.channel != channel:
            raise ScriptFormatError(f"word {w.text!r} carries channel {w.channel}, expected {channel}")
        if w.start_ms < prev_end:
            raise ScriptFormatError(f"overlapping words at {w.start_ms} ms on channel {channel}")
        prev_end = w.end_ms


def corrupt_script(
    script: list[list[TimedWord]],
    model: ErrorModel,
    rng: random.Random,
    entity_first_words: frozenset[tuple[int, int]] = frozenset(),
) -> tuple[list[list[TimedWord]], list[list[int | None]], list[CorruptionEvent]]:
    """Apply the error model once, returning corrupted truth + origin map + events."""
    truth: list[list[TimedWord]] = []
    origins: list[list[int | None]] = []
    events: list[CorruptionEvent] = []
    for ch, words in enumerate(script):
        out: list[TimedWord] = []
        orig: list[int | None] = []
        for i, w in enumerate(words):
            rates = model.digit if w.text in DIGIT_WORDS else model.nondigit
            targeted = (ch, i) in entity_first_words and rng.random() < model.first_entity_digit_sub
            if targeted:
                sub = confuse(w.text, rng, nondigit_only=True)
                out.append(replace(w, text=sub))
                orig.append(i)
                events.append(CorruptionEvent(ch, i, "sub", w.text, sub))
            else:
                u = rng.random()
                if u < rates.deletion:
                    events.append(CorruptionEvent(ch, i, "del", w.text, ""))
                elif u < rates.deletion + rates.substitution:
                    sub = confuse(w.text, rng)
                    out.append(replace(w, text=sub))
                    orig.append(i)
                    events.append(CorruptionEvent(ch, i, "sub", w.text, sub))
                else:
                    out.append(w)
                    orig.append(i)
            if rates.insertion and rng.random() < rates.insertion:
                gap_end = words[i + 1].start_ms if i + 1 < len(words) else w.end_ms + 400.0
                gap = gap_end - w.end_ms
                if gap >= 80.0:  # skip when there is no room between words
                    tok = rng.choice(_INSERT_VOCAB)
                    ins_start = w.end_ms + gap * 0.25
                    ins_end = min(ins_start + 200.0, gap_end - gap * 0.25)
                    if ins_end > ins_start:
                        out.append(TimedWord(tok, ins_start, ins_end, ch))
                        orig.append(None)
                        events.append(CorruptionEvent(ch, i, "ins", "", tok))
        truth.append(out)
        origins.append(orig)
    return truth, origins, events


def _channel_emissions(
    words: list[TimedWord],
    cfg: DecoderSimConfig,
    rng: random.Random,
    channel: int,
) -> list[PartialHypothesis]:
    # Sampled at load: the form each word shows on its first unstable appearance.
    first_forms = [
        confuse(w.text, rng) if rng.random() < cfg.revision_prob else w.text for w in words
    ]
    if not words:
        return [PartialHypothesis(channel, float(cfg.cadence_ms), (), 0, is_final=True)]

    appear_at = [w.end_ms + cfg.latency_ms for w in words]
    emissions: list[PartialHypothesis] = []
    appeared: set[int] = set()
    prev_words: tuple[TimedWord, ...] | None = None
    prev_n = 0
    dirty = True  # previous emission showed a substitute still to be corrected
    k = 1
    while True:
        t = float(k * cfg.cadence_ms)
        n = bisect_right(appear_at, t)
        k += 1
        if n == 0 or (n == prev_n and not dirty):
            continue
        stable = max(0, n - cfg.instability_tail)
        display = tuple(
            words[i]
            if i < stable or i in appeared or first_forms[i] == words[i].text
            else replace(words[i], text=first_forms[i])
            for i in range(n)
        )
        truthful = all(display[i].text == words[i].text for i in range(n))
        if n == len(words) and truthful:
            emissions.append(PartialHypothesis(channel, t, tuple(words), n, is_final=True))
            return emissions
        if display != prev_words:
            emissions.append(PartialHypothesis(channel, t, display, stable))
            appeared.update(range(n))
            prev_words = display
        dirty = not truthful
        prev_n = n


def replay_decode(
    script: list[list[TimedWord]],
    cfg: DecoderSimConfig,
    entity_first_words: frozenset[tuple[int, int]] = frozenset(),
) -> ReplayResult:
    """Replay a two-channel script as a merged partial-hypothesis stream.

    Deterministic for a fixed (script, config, seed). Agent-channel
    emissions sort first on emission-time ties.
    """
    for ch, words in enumerate(script):
        _validate_channel(words, ch)
    rng = random.Random(cfg.seed)
    truth, origins, corruptions = corrupt_script(script, cfg.error_model, rng, entity_first_words)
    streams = [
        _channel_emissions(truth[ch], cfg, random.Random(rng.random()), ch)
        for ch in range(len(script))
    ]
    merged = sorted(
        (h for stream in streams for h in stream),
        key=lambda h: (h.emission_time_ms, h.channel),
    )
    return ReplayResult(merged, truth, origins, corruptions)


@dataclass(frozen=True)
class HypDiff:
    newly_stable: tuple[TimedWord, ...]
    retracted: tuple[TimedWord, ...]
    new_tail: tuple[TimedWord, ...]


def hyp_diff(prev: PartialHypothesis, next_hyp: PartialHypothesis) -> HypDiff:
    """Describe the transition between consecutive hypotheses of one channel."""
    if prev.channel != next_hyp.channel:
        raise ValueError("hypotheses come from different channels")
    if next_hyp.emission_time_ms < prev.emission_time_ms:
        raise ValueError("hypotheses out of emission order")
    if next_hyp.stable_prefix_len < prev.stable_prefix_len:
        raise DecoderContractError("stable prefix shrank")
    if next_hyp.words[: prev.stable_prefix_len] != prev.words[: prev.stable_prefix_len]:
        raise DecoderContractError("stable prefix contradicted")

    agree = 0
    for a, b in zip(prev.words, next_hyp.words):
        if a != b:
            break
        agree += 1
    return HypDiff(
        newly_stable=next_hyp.words[prev.stable_prefix_len : next_hyp.stable_prefix_len],
        retracted=prev.words[agree:],
        new_tail=next_hyp.words[agree:],
    )
