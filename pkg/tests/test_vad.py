import numpy as np
import pytest

from liveredact.vad import (
    SPEECH,
    SILENCE,
    ChannelVad,
    SegmentTimeline,
    VadConfig,
    VadState,
    classify_frame,
    frame_energies,
    segment,
    silence_duration,
)

CFG = VadConfig()


def test_zero_energy_is_silence_and_floor_decays():
    state = VadState(noise_floor=100.0)
    assert classify_frame(0.0, state, CFG) == SILENCE
    assert state.noise_floor == pytest.approx(95.0)
    for _ in range(500):
        classify_frame(0.0, state, CFG)
    assert state.noise_floor == CFG.floor_min


def test_threshold_definition():
    state = VadState(noise_floor=100.0)
    assert classify_frame(301.0, state, CFG) == SPEECH
    assert state.noise_floor == 100.0  # floor adapts on silence frames only
    assert classify_frame(300.0, state, CFG) == SILENCE


def test_constant_energy_at_floor_stays_silent():
    # fixed point of the update: floor tracks E exactly, E never exceeds 3E
    state = VadState(noise_floor=50.0)
    for _ in range(1000):
        assert classify_frame(50.0, state, CFG) == SILENCE
        assert state.noise_floor == pytest.approx(50.0)


def test_negative_energy_rejected():
    with pytest.raises(ValueError):
        classify_frame(-1.0, VadState(noise_floor=1.0), CFG)


def _tone(start_ms, dur_ms, total_ms, level=0.5):
    n = total_ms * 8
    x = np.zeros(n)
    a, b = start_ms * 8, (start_ms + dur_ms) * 8
    t = np.arange(b - a) / 8000.0
    x[a:b] = level * 32767 * np.sin(2 * np.pi * 440 * t)
    return x


def test_all_zero_audio_gives_no_segments():
    assert segment(np.zeros(8000 * 3)) == []


def test_single_burst_segmented_with_tight_start():
    x = _tone(1000, 500, 3000)  # -6 dBFS burst inside digital silence
    segs = segment(x, CFG, channel=1)
    assert len(segs) == 1
    (seg,) = segs
    assert seg.channel == 1
    assert abs(seg.start_ms - 1000) <= 40
    assert 1500 - CFG.hop_ms <= seg.end_ms <= 1500 + CFG.hangover_frames * CFG.hop_ms


def test_isolated_blips_below_onset_are_dropped():
    x = np.zeros(8000 * 4)
    for start in (500, 1500, 2500, 3500):
        x[start * 8 : start * 8 + 80] = 10000.0  # 10 ms blips
    assert segment(x) == []


def test_determinism_and_segment_wellformedness():
    rng = np.random.default_rng(3)
    x = rng.normal(0, 200, 8000 * 5)
    x[8000 * 2 : 8000 * 3] += rng.normal(0, 8000, 8000)
    a = segment(x)
    b = segment(x)
    assert a == b
    for s0, s1 in zip(a, a[1:]):
        assert s0.end_ms <= s1.start_ms  # disjoint and sorted
    assert all(0 <= s.start_ms < s.end_ms <= 5000 for s in a)


def test_gain_invariance_of_labels():
    rng = np.random.default_rng(4)
    x = rng.normal(0, 100, 8000 * 4)  # noise floor well above floor_min
    x[8000:16000] += rng.normal(0, 5000, 8000)
    assert segment(4.0 * x) == segment(x)


def test_silence_duration_contract():
    state = VadState(noise_floor=1.0, in_speech=True)
    assert silence_duration(state, 9999.0) == 0.0
    state.in_speech = False
    state.last_speech_end_ms = 1000.0
    assert silence_duration(state, 4500.0) == 3500.0


def test_silence_resets_across_speech_reentry():
    cfg = VadConfig(onset_frames=1, hangover_frames=2)
    vad = ChannelVad(cfg, channel=0, initial_floor=10.0)
    for e in [5000.0, 5000.0, 0.0, 0.0, 0.0]:
        vad.push(e)
    assert not vad.state.in_speech
    gap = silence_duration(vad.state, 500.0)
    assert gap > 0
    vad.push(5000.0)  # re-entry
    assert vad.state.in_speech
    assert silence_duration(vad.state, 600.0) == 0.0


def test_frame_energy_windowing():
    x = np.ones(160 * 4) * 2.0
    e = frame_energies(x, CFG)
    assert np.allclose(e, 4.0)
    assert len(e) == 1 + (len(x) - 160) // 80


def test_segment_timeline_silence_clock():
    tl = SegmentTimeline([])
    assert tl.silence_at(1234.0) == 1234.0
    from liveredact.vad import SpeechSegment

    tl = SegmentTimeline([SpeechSegment(1, 1000.0, 2000.0), SpeechSegment(1, 6000.0, 7000.0)])
    assert tl.silence_at(1500.0) == 0.0
    assert tl.silence_at(5000.0) == 3000.0
    assert tl.silence_at(6500.0) == 0.0
    assert tl.silence_at(9500.0) == 2500.0


def test_config_validation():
    with pytest.raises(ValueError):
        VadConfig(frame_ms=5, hop_ms=10)
    with pytest.raises(ValueError):
        VadConfig(threshold_factor=1.0)
    with pytest.raises(ValueError):
        VadConfig(floor_adapt_rate=0.0)
