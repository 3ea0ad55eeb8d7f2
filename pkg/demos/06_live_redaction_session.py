#!/usr/bin/env python3
# Drive one scripted call through the whole pipeline: replay decode, entity
# triggering, beep masking under a hold-back buffer, and value capture.

from liveredact import GenConfig, generate_corpus
from liveredact.corpus import render_call_audio
from liveredact.decoder import DecoderSimConfig
from liveredact.nlu import OracleClassifier
from liveredact.session import SessionConfig, run_session

bundle = generate_corpus(GenConfig(n_calls=1, seed=6, max_entities=3))[0]
audio = render_call_audio(bundle)
print(f"{bundle.call_id}: {bundle.duration_ms/1000:.0f}s, gold entities:")
for e in bundle.entities:
    start, end = bundle.entity_time_span(e)
    print(f"  {e.entity_type.value:8s} {start/1000:6.1f}..{end/1000:6.1f}s  canonical={e.canonical}")

cfg = SessionConfig(holdback_ms=500.0, decoder=DecoderSimConfig(revision_prob=0.0, seed=1))
out = run_session(bundle, cfg, OracleClassifier(bundle.gold_spans()), audio=audio)

print("\nevent log:")
for ev in out.events:
    print(f"  t={ev.time_ms:8.0f} ch{ev.channel} {ev.kind:14s} {ev.detail}")

print("\ncaptures:")
for cap in out.captures:
    val = cap.canonical.value if cap.canonical else "<none>"
    print(f"  {cap.entity_type.value:8s} {val}  valid={cap.valid}")

print("\nredacted caller transcript:")
print("  " + " ".join(out.transcript.tokens[1]))

print(f"\nmask spans: {[(s.channel, round(s.start_ms), round(s.end_ms)) for s in out.mask_spans]}")
print(f"live leak duration: {out.metrics.leak_duration_ms:.0f} ms "
      f"(audio already emitted when each mask opened)")
print(f"cpu_vs_audio: {out.metrics.cpu_vs_audio:.5f}")
