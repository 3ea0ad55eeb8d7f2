"""Flat dotted-key config files (`vad.*`, `nlu.*`, `lar.*`, `pipeline.*`, ...).

Line format: ``key = value`` with ``#`` comments. Every CLI flag or
``--set key=value`` overrides the file. Unknown keys are rejected so
typos fail loudly.
"""

from __future__ import annotations

from dataclasses import replace

from .audio import BeepConfig
from .corpus import GenConfig
from .decoder import DecoderSimConfig, ErrorModel, ErrorRates
from .entities import parse_sensitive_set
from .numwords import NumberLexicon
from .session import SessionConfig
from .vad import VadConfig


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int_tuple(s: str) -> tuple[int, ...]:
    return tuple(int(p) for p in s.split(",") if p.strip())


CONFIG_SCHEMA: dict[str, object] = {
    "pipeline.holdback_ms": float,
    "pipeline.clock_tick_ms": int,
    "lar.sensitive": parse_sensitive_set,
    "lar.mask_agent_repeats": _bool,
    "lar.capture_timeout_ms": float,
    "lar.nondigit_limit": int,
    "lar.silence_limit_ms": float,
    "normalizer.lexicon": str,
    "vad.frame_ms": int,
    "vad.hop_ms": int,
    "vad.threshold_factor": float,
    "vad.floor_adapt_rate": float,
    "vad.onset_frames": int,
    "vad.hangover_frames": int,
    "vad.floor_min": float,
    "decoder.cadence_ms": int,
    "decoder.latency_ms": int,
    "decoder.instability_tail": int,
    "decoder.revision_prob": float,
    "decoder.seed": int,
    "decoder.digit_sub_rate": float,
    "decoder.digit_del_rate": float,
    "decoder.digit_ins_rate": float,
    "decoder.nondigit_sub_rate": float,
    "decoder.nondigit_del_rate": float,
    "decoder.nondigit_ins_rate": float,
    "decoder.first_entity_digit_sub_rate": float,
    "beep.frequency_hz": float,
    "beep.amplitude_dbfs": float,
    "beep.ramp_ms": float,
    "nlu.ngram_orders": _int_tuple,
    "nlu.min_freq": int,
    "nlu.l2_lambda": float,
    "nlu.tol": float,
    "gen.n_calls": int,
    "gen.min_entities": int,
    "gen.max_entities": int,
    "gen.filler_rate": float,
    "gen.correction_rate": float,
    "gen.hesitation_rate": float,
    "gen.luhn_valid_prob": float,
    "gen.render_audio": _bool,
    "gen.seed": int,
}


def parse_config_file(path) -> dict[str, object]:
    settings: dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, value = (p.strip() for p in line.split("=", 1))
            settings[key] = _coerce(key, value, where=f"{path}:{lineno}")
    return settings


def apply_overrides(settings: dict[str, object], pairs: list[str]) -> dict[str, object]:
    out = dict(settings)
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"--set expects key=value, got {pair!r}")
        key, value = (p.strip() for p in pair.split("=", 1))
        out[key] = _coerce(key, value, where="--set")
    return out


def _coerce(key: str, value: str, where: str) -> object:
    caster = CONFIG_SCHEMA.get(key)
    if caster is None:
        raise ValueError(f"{where}: unknown config key {key!r}")
    try:
        return caster(value)  # type: ignore[operator]
    except ValueError as exc:
        raise ValueError(f"{where}: bad value for {key}: {exc}") from None


def session_config(settings: dict[str, object]) -> SessionConfig:
    s = settings

    def get(key, default):
        return s.get(key, default)

    error_model = ErrorModel(
        digit=ErrorRates(
            substitution=get("decoder.digit_sub_rate", 0.0),
            deletion=get("decoder.digit_del_rate", 0.0),
            insertion=get("decoder.digit_ins_rate", 0.0),
        ),
        nondigit=ErrorRates(
            substitution=get("decoder.nondigit_sub_rate", 0.0),
            deletion=get("decoder.nondigit_del_rate", 0.0),
            insertion=get("decoder.nondigit_ins_rate", 0.0),
        ),
        first_entity_digit_sub=get("decoder.first_entity_digit_sub_rate", 0.0),
    )
    decoder = DecoderSimConfig(
        cadence_ms=get("decoder.cadence_ms", 300),
        latency_ms=get("decoder.latency_ms", 200),
        instability_tail=get("decoder.instability_tail", 2),
        revision_prob=get("decoder.revision_prob", 0.1),
        error_model=error_model,
        seed=get("decoder.seed", 0),
    )
    vad = VadConfig(
        frame_ms=get("vad.frame_ms", 20),
        hop_ms=get("vad.hop_ms", 10),
        threshold_factor=get("vad.threshold_factor", 3.0),
        floor_adapt_rate=get("vad.floor_adapt_rate", 0.05),
        onset_frames=get("vad.onset_frames", 3),
        hangover_frames=get("vad.hangover_frames", 20),
        floor_min=get("vad.floor_min", 1.0),
    )
    beep = BeepConfig(
        frequency_hz=get("beep.frequency_hz", 1000.0),
        amplitude_dbfs=get("beep.amplitude_dbfs", -12.0),
        ramp_ms=get("beep.ramp_ms", 10.0),
    )
    lexicon = (
        NumberLexicon.from_file(s["normalizer.lexicon"])
        if "normalizer.lexicon" in s
        else SessionConfig.__dataclass_fields__["lexicon"].default
    )
    cfg = SessionConfig(
        holdback_ms=get("pipeline.holdback_ms", 500.0),
        clock_tick_ms=get("pipeline.clock_tick_ms", 100),
        decoder=decoder,
        vad=vad,
        beep=beep,
        lexicon=lexicon,
        mask_agent_repeats=get("lar.mask_agent_repeats", True),
        capture_timeout_ms=get("lar.capture_timeout_ms", 2000.0),
        nondigit_limit=get("lar.nondigit_limit", 3),
        silence_limit_ms=get("lar.silence_limit_ms", 3000.0),
    )
    if "lar.sensitive" in s:
        cfg = replace(cfg, sensitive=s["lar.sensitive"])
    return cfg


def gen_config(settings: dict[str, object]) -> GenConfig:
    s = settings
    return GenConfig(
        n_calls=s.get("gen.n_calls", 10),
        min_entities=s.get("gen.min_entities", 2),
        max_entities=s.get("gen.max_entities", 5),
        filler_rate=s.get("gen.filler_rate", 0.3),
        correction_rate=s.get("gen.correction_rate", 0.15),
        hesitation_rate=s.get("gen.hesitation_rate", 0.0),
        luhn_valid_prob=s.get("gen.luhn_valid_prob", 0.98),
        render_audio=s.get("gen.render_audio", False),
        seed=s.get("gen.seed", 0),
    )
