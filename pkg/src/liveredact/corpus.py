"""Call-bundle corpus: on-disk format, validation, and synthetic generation.

A corpus is a UTF-8 JSON-lines file (one call per line, versioned) plus
optional per-call WAV files. Loading validates that every annotated
canonical value agrees with the number grammar over the annotated words,
so corpus and grammar can never drift apart. The generator interleaves
agent prompts with caller responses, draws entity values per type
(Luhn-valid card numbers, ABA-valid routing numbers), samples
verbalization styles, and synthesizes word timings; it can also render
each word as a band-limited noise burst so masking is measurable
acoustically.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import AGENT, CALLER, SAMPLE_RATE, PcmBuffer
from .decoder import TimedWord
from .entities import EntityType
from .numwords import (
    DEFAULT_LEXICON,
    aba_complete,
    luhn_complete,
    verbalize,
    words_to_digits,
)

BUNDLE_VERSION = 1
CORPUS_FILENAME = "calls.jsonl"


class BundleValidationError(ValueError):
    """A bundle record violated the schema or its annotations."""


@dataclass(frozen=True)
class EntityAnnotation:
    entity_type: EntityType
    channel: int
    first_word: int
    last_word: int
    canonical: str


@dataclass
class CallBundle:
    call_id: str
    duration_ms: float
    words: list[list[TimedWord]]  # index 0 agent, 1 caller
    entities: list[EntityAnnotation]
    seed: int = 0
    audio_path: str | None = None

    def entity_words(self, ann: EntityAnnotation) -> list[TimedWord]:
        return self.words[ann.channel][ann.first_word : ann.last_word + 1]

    def entity_time_span(self, ann: EntityAnnotation) -> tuple[float, float]:
        span = self.entity_words(ann)
        return span[0].start_ms, span[-1].end_ms

    def gold_spans(self) -> list[tuple[int, float, float, EntityType]]:
        """(channel, start_ms, end_ms, type) per annotation; oracle NLU input."""
        out = []
        for ann in self.entities:
            start, end = self.entity_time_span(ann)
            out.append((ann.channel, start, end, ann.entity_type))
        return out


def _words_to_json(words: list[TimedWord]) -> list[list]:
    return [[w.text, w.start_ms, w.end_ms] for w in words]


def bundle_to_json(bundle: CallBundle) -> dict:
    return {
        "version": BUNDLE_VERSION,
        "call_id": bundle.call_id,
        "duration_ms": bundle.duration_ms,
        "seed": bundle.seed,
        "agent_words": _words_to_json(bundle.words[AGENT]),
        "caller_words": _words_to_json(bundle.words[CALLER]),
        "entities": [
            {
                "type": a.entity_type.value,
                "channel": a.channel,
                "first_word": a.first_word,
                "last_word": a.last_word,
                "canonical": a.canonical,
            }
            for a in bundle.entities
        ],
        "audio_file": Path(bundle.audio_path).name if bundle.audio_path else None,
    }


def _check_channel_words(words: list[TimedWord], where: str) -> None:
    prev_end = -1.0
    for w in words:
        if w.start_ms < prev_end:
            raise BundleValidationError(f"{where}: words overlap or are unsorted at {w.start_ms} ms")
        prev_end = w.end_ms


def validate_bundle(bundle: CallBundle, where: str = "") -> None:
    where = where or bundle.call_id
    for ch, name in ((AGENT, "agent"), (CALLER, "caller")):
        _check_channel_words(bundle.words[ch], f"{where}/{name}")
    for k, ann in enumerate(bundle.entities):
        n = len(bundle.words[ann.channel])
        if not 0 <= ann.first_word <= ann.last_word < n:
            raise BundleValidationError(f"{where}: entity {k} indices out of range")
        texts = [w.text for w in bundle.entity_words(ann)]
        got = words_to_digits(texts, ann.entity_type).value
        if got != ann.canonical:
            raise BundleValidationError(
                f"{where}: entity {k} canonical {ann.canonical!r} disagrees with normalizer {got!r}"
            )


def bundle_from_json(doc: dict, base_dir: Path | None = None, where: str = "") -> CallBundle:
    if doc.get("version") != BUNDLE_VERSION:
        raise BundleValidationError(f"{where}: unsupported bundle version {doc.get('version')!r}")
    words = []
    for ch, key in ((AGENT, "agent_words"), (CALLER, "caller_words")):
        words.append([TimedWord(t, float(s), float(e), ch) for t, s, e in doc[key]])
    entities = [
        EntityAnnotation(
            EntityType[a["type"]], int(a["channel"]), int(a["first_word"]), int(a["last_word"]), a["canonical"]
        )
        for a in doc["entities"]
    ]
    audio_path = None
    if doc.get("audio_file"):
        audio_path = str((base_dir / doc["audio_file"]) if base_dir else Path(doc["audio_file"]))
    bundle = CallBundle(
        call_id=doc["call_id"],
        duration_ms=float(doc["duration_ms"]),
        words=words,
        entities=entities,
        seed=int(doc.get("seed", 0)),
        audio_path=audio_path,
    )
    validate_bundle(bundle, where)
    return bundle


def save_corpus(bundles: list[CallBundle], out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / CORPUS_FILENAME
    with open(path, "w", encoding="utf-8") as fh:
        for b in bundles:
            fh.write(json.dumps(bundle_to_json(b), sort_keys=True) + "\n")
    return path


def load_corpus(path) -> list[CallBundle]:
    """Load bundles from a corpus dir or a .jsonl file, with validation."""
    p = Path(path)
    if p.is_dir():
        p = p / CORPUS_FILENAME
    bundles = []
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BundleValidationError(f"{p}:{lineno}: bad JSON ({exc})") from None
            bundles.append(bundle_from_json(doc, p.parent, where=f"{p}:{lineno}"))
    return bundles


# ---------------------------------------------------------------------------
# synthetic generation

_DEFAULT_MIX = {
    EntityType.CCNUM: 2.5,
    EntityType.CVV: 1.7,
    EntityType.EXPDATE: 2.4,
    EntityType.ZIP: 2.2,
    EntityType.ROUTING: 0.4,
    EntityType.BANKACC: 0.4,
}

_PROMPTS: dict[EntityType, list[list[str]]] = {
    EntityType.CCNUM: [
        "can i have your card number please".split(),
        "may i get the credit card number".split(),
        "please read me the long number on the front of the card".split(),
    ],
    EntityType.CVV: [
        "and the security code on the back please".split(),
        "can you read me the cvv code from the back of the card".split(),
    ],
    EntityType.EXPDATE: [
        "what is the expiration date on the card".split(),
        "and when does that card expire for you".split(),
    ],
    EntityType.ZIP: [
        "what is the billing zip code on the account".split(),
        "can i get your zip code please".split(),
    ],
    EntityType.ROUTING: [
        "please read me your bank routing number".split(),
        "i will need the routing number from the bottom of a check".split(),
    ],
    EntityType.BANKACC: [
        "and your bank account number please".split(),
        "can you give me the account number for the checking account".split(),
    ],
    EntityType.OTHER: [
        "how many items would you like to order today".split(),
        "and what quantity should i put down for that".split(),
        "how many boxes are we shipping".split(),
    ],
}

_GREETING_AGENT = "thank you for calling how can i help you today".split()
_GREETING_CALLER = "hi i would like to make a payment on my account".split()
_CLOSING_AGENT = "great that payment has gone through is there anything else".split()
_CLOSING_CALLER = "no that was everything thank you so much goodbye".split()

_PREFIXES = [[], ["sure"], ["yes"], ["okay", "its"], ["sure", "its"], ["yes", "the", "number", "is"], ["let", "me", "check", "its"]]
_SUFFIXES = [[], ["okay"], ["did", "you", "get", "that"], ["and", "thats", "all", "of", "it"], ["hope", "that", "works"]]
_FILLERS = ["um", "uh", "hmm", "well", "okay"]

#: Minimum caller-channel silence between utterances; keeps each number
#: phrase cleanly separated by the >3 s end-of-entity rule.
_UTTERANCE_SILENCE_MS = 3300.0


@dataclass(frozen=True)
class GenConfig:
    n_calls: int = 10
    entity_mix: dict = field(default_factory=lambda: dict(_DEFAULT_MIX))
    min_entities: int = 2
    max_entities: int = 5
    other_utterances: tuple[int, int] = (1, 2)
    filler_rate: float = 0.3
    correction_rate: float = 0.15
    hesitation_rate: float = 0.0
    luhn_valid_prob: float = 0.98
    render_audio: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        for r in (self.filler_rate, self.correction_rate, self.hesitation_rate, self.luhn_valid_prob):
            if not 0.0 <= r <= 1.0:
                raise ValueError("rates must lie in [0, 1]")


def sample_value(etype: EntityType, rng: random.Random, luhn_valid_prob: float = 0.98) -> str:
    if etype is EntityType.CCNUM:
        length = rng.choice([16] * 8 + [15, 13, 19])
        prefix = str(rng.randrange(1, 10)) + "".join(str(rng.randrange(10)) for _ in range(length - 2))
        value = luhn_complete(prefix)
        if rng.random() >= luhn_valid_prob:  # a few deliberately failing checksums
            value = value[:-1] + str((int(value[-1]) + 1) % 10)
        return value
    if etype is EntityType.ROUTING:
        return aba_complete("".join(str(rng.randrange(10)) for _ in range(8)))
    if etype is EntityType.BANKACC:
        return "".join(str(rng.randrange(10)) for _ in range(rng.randrange(6, 13)))
    if etype is EntityType.CVV:
        return "".join(str(rng.randrange(10)) for _ in range(rng.choice([3, 3, 3, 4])))
    if etype is EntityType.ZIP:
        return "".join(str(rng.randrange(10)) for _ in range(5))
    if etype is EntityType.EXPDATE:
        return f"{rng.randrange(1, 13):02d}/{rng.randrange(24, 33):02d}"
    return str(rng.randrange(1, 1000))  # OTHER: small quantities


def _pick_style(etype: EntityType, rng: random.Random, correction_rate: float) -> str:
    if etype is not EntityType.OTHER and rng.random() < correction_rate:
        return "with_corrections"
    return rng.choice(["plain", "plain", "grouped", "grouped", "repeater"])


class _Timeline:
    """Places words on a channel; keeps per-channel cursors consistent."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.words: list[list[TimedWord]] = [[], []]
        self.cursor = 0.0

    def add_utterance(self, channel: int, tokens: list[str], min_start: float = 0.0) -> list[int]:
        t = max(self.cursor, min_start)
        idxs = []
        for k, tok in enumerate(tokens):
            if k:
                t += self.rng.uniform(150.0, 600.0)
            dur = self.rng.uniform(300.0, 450.0)
            self.words[channel].append(TimedWord(tok, t, t + dur, channel))
            idxs.append(len(self.words[channel]) - 1)
            t += dur
        self.cursor = t + self.rng.uniform(600.0, 1200.0)
        return idxs

    def insert_gap(self, gap_ms: float) -> None:
        self.cursor += gap_ms

    def last_caller_end(self) -> float:
        return self.words[CALLER][-1].end_ms if self.words[CALLER] else 0.0


def generate_call(call_id: str, cfg: GenConfig, seed: int) -> CallBundle:
    rng = random.Random(seed)
    tl = _Timeline(rng)
    entities: list[EntityAnnotation] = []

    types = list(cfg.entity_mix.keys())
    weights = [cfg.entity_mix[t] for t in types]
    n_entities = rng.randrange(cfg.min_entities, cfg.max_entities + 1)
    slots = rng.choices(types, weights=weights, k=n_entities)
    slots += [EntityType.OTHER] * rng.randrange(cfg.other_utterances[0], cfg.other_utterances[1] + 1)
    rng.shuffle(slots)

    tl.add_utterance(AGENT, _GREETING_AGENT)
    tl.add_utterance(CALLER, _GREETING_CALLER)

    for etype in slots:
        tl.add_utterance(AGENT, rng.choice(_PROMPTS[etype]))
        value = sample_value(etype, rng, cfg.luhn_valid_prob)
        style = _pick_style(etype, rng, cfg.correction_rate)
        entity_tokens = verbalize((etype, value), style, seed=rng.randrange(2**31))
        prefix = rng.choice(_PREFIXES)
        suffix = list(rng.choice(_SUFFIXES))
        if rng.random() < cfg.filler_rate:
            suffix.append(rng.choice(_FILLERS))

        min_start = tl.last_caller_end() + _UTTERANCE_SILENCE_MS
        tl.add_utterance(CALLER, prefix, min_start=min_start)
        if prefix:
            tl.cursor = tl.words[CALLER][-1].end_ms + rng.uniform(150.0, 600.0)
        if rng.random() < cfg.hesitation_rate and len(entity_tokens) >= 4:
            cut = rng.randrange(2, len(entity_tokens) - 1)
            first_idx = tl.add_utterance(CALLER, entity_tokens[:cut])
            tl.cursor = tl.words[CALLER][-1].end_ms + rng.uniform(3300.0, 4200.0)
            rest_idx = tl.add_utterance(CALLER, entity_tokens[cut:])
            idxs = first_idx + rest_idx
        else:
            idxs = tl.add_utterance(CALLER, entity_tokens)
        tl.cursor = tl.words[CALLER][-1].end_ms + rng.uniform(150.0, 600.0)
        tl.add_utterance(CALLER, suffix)

        entities.append(EntityAnnotation(etype, CALLER, idxs[0], idxs[-1], value))

    tl.add_utterance(AGENT, _CLOSING_AGENT)
    tl.add_utterance(CALLER, _CLOSING_CALLER, min_start=tl.last_caller_end() + _UTTERANCE_SILENCE_MS)

    last_end = max(ws[-1].end_ms for ws in tl.words if ws)
    bundle = CallBundle(
        call_id=call_id,
        duration_ms=last_end + 5000.0,
        words=tl.words,
        entities=entities,
        seed=seed,
    )
    validate_bundle(bundle)
    return bundle


def generate_corpus(cfg: GenConfig, out_dir=None) -> list[CallBundle]:
    """Generate seeded bundles; when out_dir is given, write calls.jsonl
    (plus WAVs when cfg.render_audio)."""
    master = random.Random(cfg.seed)
    bundles = []
    for i in range(cfg.n_calls):
        bundles.append(generate_call(f"call-{i:06d}", cfg, seed=master.randrange(2**31)))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if cfg.render_audio:
            from .audio import write_wav

            for b in bundles:
                pcm = render_call_audio(b)
                wav = out / f"{b.call_id}.wav"
                write_wav(wav, pcm)
                b.audio_path = str(wav)
        save_corpus(bundles, out)
    return bundles


def render_call_audio(bundle: CallBundle, low_hz: float = 300.0, high_hz: float = 2500.0) -> PcmBuffer:
    """Render each word as a band-limited noise burst over its time span."""
    rng = np.random.default_rng(bundle.seed)
    n = int(round(bundle.duration_ms * SAMPLE_RATE / 1000.0))
    out = np.zeros((2, n), dtype=np.float64)
    for ch in (AGENT, CALLER):
        for w in bundle.words[ch]:
            a = int(round(w.start_ms * SAMPLE_RATE / 1000.0))
            b = min(int(round(w.end_ms * SAMPLE_RATE / 1000.0)), n)
            if b - a < 8:
                continue
            burst = rng.standard_normal(b - a)
            spec = np.fft.rfft(burst)
            freqs = np.fft.rfftfreq(b - a, d=1.0 / SAMPLE_RATE)
            spec[(freqs < low_hz) | (freqs > high_hz)] = 0.0
            burst = np.fft.irfft(spec, b - a)
            peak = np.max(np.abs(burst)) or 1.0
            out[ch, a:b] = burst / peak * (0.1 * 32767.0)
    return PcmBuffer(np.round(out).astype(np.int16))
