#!/usr/bin/env python3
# The replay decoder turns a timed transcript into partial hypotheses with
# configurable cadence, latency, unstable tails, and injected errors.

from liveredact.decoder import (
    DecoderSimConfig,
    ErrorModel,
    ErrorRates,
    TimedWord,
    hyp_diff,
    replay_decode,
)


def caller(tokens, start=100.0, dur=280.0, gap=120.0):
    words, t = [], start
    for tok in tokens:
        words.append(TimedWord(tok, t, t + dur, 1))
        t += dur + gap
    return words


script = [[], caller("my card is four two four two".split())]

# Unstable tail: the newest words may first appear as confusions, then correct.
cfg = DecoderSimConfig(cadence_ms=300, latency_ms=200, instability_tail=2, revision_prob=0.6, seed=4)
res = replay_decode(script, cfg)
print("caller emission stream (stable prefix marked with |):")
prev = None
for h in res.hypotheses:
    if h.channel != 1:
        continue
    texts = [w.text for w in h.words]
    shown = " ".join(texts[: h.stable_prefix_len]) + " | " + " ".join(texts[h.stable_prefix_len :])
    tag = "FINAL" if h.is_final else "     "
    print(f"  t={h.emission_time_ms:6.0f} {tag} {shown}")
    if prev is not None:
        d = hyp_diff(prev, h)
        if d.retracted:
            print(f"           retracted: {[w.text for w in d.retracted]}")
    prev = h

# Errors are sampled once at load into a stable corrupted truth, so every
# partial stays consistent with the final hypotheses.
em = ErrorModel(digit=ErrorRates(substitution=0.5), nondigit=ErrorRates(deletion=0.3))
res = replay_decode(script, DecoderSimConfig(revision_prob=0.0, error_model=em, seed=11))
print("\nscript:          ", [w.text for w in script[1]])
print("corrupted truth: ", [w.text for w in res.truth[1]])
print("corruption log:  ", [(c.kind, c.original or c.replacement) for c in res.corruptions])
