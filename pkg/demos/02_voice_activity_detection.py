#!/usr/bin/env python3
# Two-stage energy VAD: adaptive floor classification, then hangover smoothing.

import numpy as np

from liveredact.vad import VadConfig, VadState, classify_frame, frame_energies, segment

rng = np.random.default_rng(0)

# Build 6 s of audio: low background noise with two speech-like bursts.
x = rng.normal(0, 80, 8000 * 6)
x[8000 * 1 : 8000 * 2] += rng.normal(0, 6000, 8000)          # 1.0 - 2.0 s
x[int(8000 * 3.5) : int(8000 * 3.8)] += rng.normal(0, 9000, 2400)  # 3.5 - 3.8 s

cfg = VadConfig()  # 20 ms frames, 10 ms hop, 3x threshold, 20-frame hangover
segments = segment(x, cfg, channel=1)
print("speech segments (ms):")
for s in segments:
    print(f"  {s.start_ms:7.0f} .. {s.end_ms:7.0f}")

# Stage one alone: watch the noise floor adapt on silence frames only.
state = VadState(noise_floor=float(np.mean(frame_energies(x, cfg)[:10])))
labels = []
for e in frame_energies(x, cfg)[:250]:
    labels.append(classify_frame(float(e), state, cfg))
run = "".join("S" if l == "speech" else "." for l in labels)
print("\nfirst 2.5 s frame labels (S = speech):")
print(run)
print(f"noise floor after adaptation: {state.noise_floor:.0f} energy units")

# The hangover keeps short dips inside a segment; isolated blips never open one.
blips = np.zeros(8000 * 3)
for start in (500, 1500, 2500):
    blips[start * 8 : start * 8 + 80] = 20000.0
print(f"\n10 ms blips produce segments: {segment(blips, cfg)}")
