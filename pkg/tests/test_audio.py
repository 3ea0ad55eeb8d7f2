import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from liveredact.audio import (
    AGENT,
    CALLER,
    BeepConfig,
    MaskSpan,
    PcmBuffer,
    UnsupportedWavError,
    WavFormatError,
    apply_masks,
    mulaw_decode,
    mulaw_encode,
    mulaw_step,
    read_wav,
    write_wav,
)


def test_encode_zero_is_reference_value():
    assert mulaw_encode(0) == 0xFF


def test_decode_reference_points():
    # anchors from the G.711 reference table
    assert mulaw_decode(0xFF) == 0
    assert mulaw_decode(0x80) == 32124
    assert mulaw_decode(0x00) == -32124


def test_byte_roundtrip_identity_all_codes():
    codes = np.arange(256, dtype=np.uint8)
    assert np.array_equal(mulaw_encode(mulaw_decode(codes)), codes)


def test_decode_encode_error_bounded_by_segment_step_exhaustive():
    s = np.arange(-32768, 32768, dtype=np.int32)
    err = np.abs(s - mulaw_decode(mulaw_encode(s)).astype(np.int32))
    assert np.all(err <= mulaw_step(s))


def test_encode_sign_symmetry():
    s = np.arange(1, 32768, dtype=np.int32)
    pos = mulaw_encode(s)
    neg = mulaw_encode(-s)
    assert np.all((pos ^ neg) == 0x80)


def test_decode_odd_symmetry_except_negative_zero():
    # 0x7F is deliberately decoded off-center so all 256 codes round-trip;
    # every other code pair is odd-symmetric around the sign bit.
    for code in range(0x80, 0x100):
        if code ^ 0x80 == 0x7F:
            continue
        assert mulaw_decode(code) == -mulaw_decode(code ^ 0x80)


@given(st.integers(min_value=-32768, max_value=32767))
def test_roundtrip_error_random(sample):
    assert abs(sample - mulaw_decode(mulaw_encode(sample))) <= mulaw_step(sample)


def _stereo(n=8000, seed=0):
    rng = np.random.default_rng(seed)
    return PcmBuffer(rng.integers(-3000, 3000, size=(2, n)).astype(np.int16))


def test_wav_roundtrip_stereo_pcm16(tmp_path):
    pcm = _stereo()
    path = tmp_path / "x.wav"
    write_wav(path, pcm)
    back = read_wav(path)
    assert np.array_equal(back.samples, pcm.samples)


def test_wav_rejects_16khz(tmp_path):
    path = tmp_path / "x.wav"
    pcm = _stereo()
    write_wav(path, pcm)
    data = bytearray(path.read_bytes())
    struct.pack_into("<I", data, 24, 16000)
    struct.pack_into("<I", data, 28, 16000 * 4)
    path.write_bytes(bytes(data))
    with pytest.raises(UnsupportedWavError, match="rate"):
        read_wav(path)


def test_wav_rejects_malformed_header(tmp_path):
    path = tmp_path / "x.wav"
    path.write_bytes(b"OggS" + b"\x00" * 64)
    with pytest.raises(WavFormatError):
        read_wav(path)


def test_mono_input_duplicated_with_warning(tmp_path):
    path = tmp_path / "mono.wav"
    payload = np.arange(100, dtype="<i2").tobytes()
    hdr = struct.pack(
        "<4sI4s4sIHHIIHH4sI", b"RIFF", 36 + len(payload), b"WAVE", b"fmt ", 16,
        1, 1, 8000, 16000, 2, 16, b"data", len(payload),
    )
    path.write_bytes(hdr + payload)
    with pytest.warns(UserWarning, match="mono"):
        pcm = read_wav(path)
    assert np.array_equal(pcm.samples[0], pcm.samples[1])


def test_mulaw_wav_decodes_payload_bytes(tmp_path):
    path = tmp_path / "ulaw.wav"
    payload = bytes(range(256)) * 32  # 8192 bytes = ~1 s of mono mu-law
    hdr = struct.pack(
        "<4sI4s4sIHHIIHH4sI", b"RIFF", 36 + len(payload), b"WAVE", b"fmt ", 16,
        7, 1, 8000, 8000, 1, 8, b"data", len(payload),
    )
    path.write_bytes(hdr + payload)
    with pytest.warns(UserWarning):
        pcm = read_wav(path)
    expected = mulaw_decode(np.frombuffer(payload, dtype=np.uint8))
    assert np.array_equal(pcm.samples[0], expected)


def test_apply_masks_empty_is_identity():
    pcm = _stereo()
    out = apply_masks(pcm, [])
    assert np.array_equal(out.samples, pcm.samples)


def test_apply_masks_level_and_other_channel():
    pcm = PcmBuffer.silence(3000.0)
    out = apply_masks(pcm, [MaskSpan(CALLER, 1000.0, 2000.0)])
    beep = BeepConfig()
    ramp = int(beep.ramp_ms * 8)
    body = out.samples[CALLER, 8000 + ramp : 16000 - ramp].astype(np.float64)
    target = beep.peak**2 / 2.0
    assert abs(np.mean(body**2) - target) / target < 0.05
    assert np.array_equal(out.samples[AGENT], pcm.samples[AGENT])
    assert np.all(out.samples[CALLER, :8000] == 0)
    assert np.all(out.samples[CALLER, 16000:] == 0)


def test_overlapping_spans_behave_as_union():
    pcm = _stereo(24000)
    two = apply_masks(pcm, [MaskSpan(CALLER, 1000.0, 2000.0), MaskSpan(CALLER, 1500.0, 2500.0)])
    one = apply_masks(pcm, [MaskSpan(CALLER, 1000.0, 2500.0)])
    assert np.array_equal(two.samples, one.samples)


def test_apply_masks_untouched_outside_union():
    pcm = _stereo(24000, seed=3)
    spans = [MaskSpan(CALLER, 200.0, 400.0), MaskSpan(AGENT, 1000.0, 1200.0)]
    out = apply_masks(pcm, spans)
    mask_c = np.zeros(24000, dtype=bool)
    mask_c[1600:3200] = True
    mask_a = np.zeros(24000, dtype=bool)
    mask_a[8000:9600] = True
    assert np.array_equal(out.samples[CALLER, ~mask_c], pcm.samples[CALLER, ~mask_c])
    assert np.array_equal(out.samples[AGENT, ~mask_a], pcm.samples[AGENT, ~mask_a])


def test_apply_masks_idempotent():
    pcm = _stereo(16000, seed=5)
    spans = [MaskSpan(CALLER, 100.0, 900.0), MaskSpan(AGENT, 0.0, 50.0)]
    once = apply_masks(pcm, spans)
    twice = apply_masks(once, spans)
    assert np.array_equal(once.samples, twice.samples)


def test_spans_clipped_at_buffer_end():
    pcm = _stereo(8000)
    out = apply_masks(pcm, [MaskSpan(CALLER, 500.0, 99999.0)])
    assert not np.array_equal(out.samples[CALLER, 4000:], pcm.samples[CALLER, 4000:])


def test_mask_span_validation():
    with pytest.raises(ValueError):
        MaskSpan(CALLER, 500.0, 500.0)
    with pytest.raises(ValueError):
        MaskSpan(7, 0.0, 100.0)
