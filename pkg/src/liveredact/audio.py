"""Two-channel 8 kHz audio buffers, G.711 mu-law codec, WAV I/O and beep masking.

Channel convention throughout the package: channel 0 is the agent,
channel 1 is the caller.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

SAMPLE_RATE = 8000
AGENT, CALLER = 0, 1

_MULAW_BIAS = 0x84
_MULAW_CLIP = 32635

# Segment (exponent) table indexed by (biased sample >> 7); entry v holds
# floor(log2(v)) for v >= 1.
_EXP_LUT = np.zeros(256, dtype=np.int32)
for _v in range(1, 256):
    _EXP_LUT[_v] = _v.bit_length() - 1


class WavFormatError(ValueError):
    """Malformed RIFF/WAVE container."""


class UnsupportedWavError(WavFormatError):
    """Well-formed WAV whose rate/codec/layout this engine does not accept."""


def mulaw_encode(samples: np.ndarray | int) -> np.ndarray | int:
    """G.711 mu-law compand 16-bit linear samples to code bytes."""
    scalar = np.isscalar(samples)
    s = np.asarray(samples, dtype=np.int32)
    sign = np.where(s < 0, 0x80, 0)
    mag = np.minimum(np.abs(s), _MULAW_CLIP) + _MULAW_BIAS
    exponent = _EXP_LUT[(mag >> 7) & 0xFF]
    mantissa = (mag >> (exponent + 3)) & 0x0F
    code = (~(sign | (exponent << 4) | mantissa)) & 0xFF
    code = code.astype(np.uint8)
    return int(code) if scalar else code


def mulaw_decode(codes: np.ndarray | int) -> np.ndarray | int:
    """Expand mu-law code bytes back to 16-bit linear samples.

    Negative zero (0x7F) decodes to -2, the midpoint of its truncated
    quantization cell, so that every code byte round-trips through the
    linear domain (the reference table collapses 0x7F onto 0).
    """
    scalar = np.isscalar(codes)
    raw = np.asarray(codes)
    c = (~raw.astype(np.int32)) & 0xFF
    mag = (((c & 0x0F) << 3) + _MULAW_BIAS) << ((c >> 4) & 0x07)
    out = np.where(c & 0x80, _MULAW_BIAS - mag, mag - _MULAW_BIAS)
    out = np.where(raw == 0x7F, -2, out).astype(np.int16)
    return int(out) if scalar else out


def mulaw_step(samples: np.ndarray | int) -> np.ndarray | int:
    """Quantization step of the mu-law segment containing each sample."""
    scalar = np.isscalar(samples)
    s = np.asarray(samples, dtype=np.int32)
    mag = np.minimum(np.abs(s), _MULAW_CLIP) + _MULAW_BIAS
    step = np.int32(1) << (_EXP_LUT[(mag >> 7) & 0xFF] + 3)
    return int(step) if scalar else step


@dataclass(frozen=True)
class MaskSpan:
    """A channel-scoped time interval to be replaced by the beep."""

    channel: int
    start_ms: float
    end_ms: float
    cause: str = ""

    def __post_init__(self) -> None:
        if not 0 <= self.start_ms < self.end_ms:
            raise ValueError(f"invalid mask span [{self.start_ms}, {self.end_ms})")
        if self.channel not in (AGENT, CALLER):
            raise ValueError(f"invalid channel {self.channel}")


@dataclass(frozen=True)
class BeepConfig:
    """Masking tone: a 1 kHz sine at -12 dBFS with 10 ms raised-cosine ramps."""

    frequency_hz: float = 1000.0
    amplitude_dbfs: float = -12.0
    ramp_ms: float = 10.0

    def __post_init__(self) -> None:
        if not 0 < self.frequency_hz < SAMPLE_RATE / 2:
            raise ValueError("beep frequency must sit below Nyquist")
        if self.ramp_ms < 0:
            raise ValueError("ramp_ms must be >= 0")

    @property
    def peak(self) -> float:
        return 32767.0 * 10.0 ** (self.amplitude_dbfs / 20.0)


@dataclass
class PcmBuffer:
    """Stereo PCM16 buffer at 8 kHz; shape (2, n), channel 0 agent / 1 caller."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples)
        if self.samples.dtype != np.int16:
            raise ValueError("samples must be int16")
        if self.samples.ndim != 2 or self.samples.shape[0] != 2:
            raise ValueError("buffer must have shape (2, n)")
        if self.sample_rate != SAMPLE_RATE:
            raise UnsupportedWavError(f"sample_rate must be {SAMPLE_RATE}, got {self.sample_rate}")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_ms(self) -> float:
        return self.n_samples * 1000.0 / self.sample_rate

    @classmethod
    def silence(cls, duration_ms: float) -> "PcmBuffer":
        n = int(round(duration_ms * SAMPLE_RATE / 1000.0))
        return cls(np.zeros((2, n), dtype=np.int16))


_WAVE_PCM = 1
_WAVE_MULAW = 7


def read_wav(path) -> PcmBuffer:
    """Read a PCM16 or mu-law WAV at 8 kHz into a stereo buffer.

    Mono input is duplicated onto both channels with a warning.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if cid == b"fmt ":
            if size < 16:
                raise WavFormatError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            payload = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or payload is None:
        raise WavFormatError(f"{path}: missing fmt or data chunk")
    codec, channels, rate, _, _, bits = fmt
    if codec not in (_WAVE_PCM, _WAVE_MULAW):
        raise UnsupportedWavError(f"{path}: unsupported codec (format tag {codec})")
    if rate != SAMPLE_RATE:
        raise UnsupportedWavError(f"{path}: unsupported sample rate {rate} Hz (need {SAMPLE_RATE})")
    if channels not in (1, 2):
        raise UnsupportedWavError(f"{path}: unsupported channel count {channels}")

    if codec == _WAVE_PCM:
        if bits != 16:
            raise UnsupportedWavError(f"{path}: unsupported bit depth {bits} for PCM")
        flat = np.frombuffer(payload[: len(payload) // (2 * channels) * 2 * channels], dtype="<i2")
    else:
        if bits != 8:
            raise UnsupportedWavError(f"{path}: unsupported bit depth {bits} for mu-law")
        flat = mulaw_decode(np.frombuffer(payload, dtype=np.uint8))

    frames = flat.reshape(-1, channels).T
    if channels == 1:
        warnings.warn(f"{path}: mono input duplicated to both channels", stacklevel=2)
        frames = np.vstack([frames[0], frames[0]])
    return PcmBuffer(np.ascontiguousarray(frames.astype(np.int16)))


def write_wav(path, pcm: PcmBuffer) -> None:
    """Write a stereo PCM16 8 kHz WAV; byte-deterministic for a given buffer."""
    payload = pcm.samples.T.astype("<i2").tobytes()
    hdr = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        _WAVE_PCM,
        2,
        pcm.sample_rate,
        pcm.sample_rate * 4,
        4,
        16,
        b"data",
        len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(hdr + payload)


def merge_spans(spans, channel: int, limit_ms: float) -> list[tuple[float, float]]:
    """Union of a channel's spans clipped to [0, limit_ms), sorted."""
    ivs = sorted(
        (s.start_ms, min(s.end_ms, limit_ms)) for s in spans if s.channel == channel and s.start_ms < limit_ms
    )
    merged: list[tuple[float, float]] = []
    for a, b in ivs:
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged


def _tone(n: int, cfg: BeepConfig) -> np.ndarray:
    t = np.arange(n, dtype=np.float64) / SAMPLE_RATE
    tone = cfg.peak * np.sin(2.0 * np.pi * cfg.frequency_hz * t)
    ramp_n = min(int(round(cfg.ramp_ms * SAMPLE_RATE / 1000.0)), n // 2)
    if ramp_n > 0:
        # raised-cosine fades keep the mask click-free at span edges
        fade = 0.5 * (1.0 - np.cos(np.pi * np.arange(ramp_n) / ramp_n))
        tone[:ramp_n] *= fade
        tone[-ramp_n:] *= fade[::-1]
    return np.round(tone).astype(np.int16)


def apply_masks(pcm: PcmBuffer, spans, beep: BeepConfig = BeepConfig()) -> PcmBuffer:
    """Replace each masked span with the beep tone; everything else is untouched.

    Overlapping spans on a channel behave as their union; spans beyond the
    buffer end are clipped.
    """
    out = pcm.samples.copy()
    for ch in (AGENT, CALLER):
        for a_ms, b_ms in merge_spans(spans, ch, pcm.duration_ms):
            a = int(round(a_ms * SAMPLE_RATE / 1000.0))
            b = int(round(b_ms * SAMPLE_RATE / 1000.0))
            if b > a:
                out[ch, a:b] = _tone(b - a, beep)
    return PcmBuffer(out, pcm.sample_rate)
