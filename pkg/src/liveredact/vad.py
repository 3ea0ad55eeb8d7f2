"""Energy-adaptive voice activity detection with hangover smoothing.

Stage one labels 20 ms frames speech/silence against an adaptive noise
floor; stage two smooths the labels into speech segments via onset and
hangover counters. Each channel of a session runs its own instance. The
detector also supplies the caller-silence clock used for end-of-entity
decisions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio import SAMPLE_RATE

SPEECH = "speech"
SILENCE = "silence"


@dataclass(frozen=True)
class VadConfig:
    frame_ms: int = 20
    hop_ms: int = 10
    threshold_factor: float = 3.0
    floor_adapt_rate: float = 0.05
    onset_frames: int = 3
    hangover_frames: int = 20
    floor_min: float = 1.0  # squared-sample units; avoids zero-floor lockup
    calibration_ms: int = 100

    def __post_init__(self) -> None:
        if not self.frame_ms >= self.hop_ms > 0:
            raise ValueError("need frame_ms >= hop_ms > 0")
        if self.threshold_factor <= 1:
            raise ValueError("threshold_factor must exceed 1")
        if not 0 < self.floor_adapt_rate < 1:
            raise ValueError("floor_adapt_rate must lie in (0, 1)")
        if self.onset_frames < 1 or self.hangover_frames < 1:
            raise ValueError("onset_frames and hangover_frames must be >= 1")


@dataclass
class VadState:
    noise_floor: float
    in_speech: bool = False
    onset_count: int = 0
    hangover_count: int = 0
    last_speech_end_ms: float = 0.0


@dataclass(frozen=True)
class SpeechSegment:
    channel: int
    start_ms: float
    end_ms: float


def classify_frame(frame_energy: float, state: VadState, cfg: VadConfig) -> str:
    """Label one frame and adapt the noise floor on silence frames only."""
    if frame_energy < 0:
        raise ValueError("frame energy must be non-negative")
    if frame_energy > state.noise_floor * cfg.threshold_factor:
        return SPEECH
    a = cfg.floor_adapt_rate
    state.noise_floor = max(cfg.floor_min, (1.0 - a) * state.noise_floor + a * frame_energy)
    return SILENCE


def silence_duration(state: VadState, now_ms: float) -> float:
    """Milliseconds of silence since the last speech end; 0 while in speech."""
    if state.in_speech:
        return 0.0
    return max(0.0, now_ms - state.last_speech_end_ms)


def frame_energies(samples: np.ndarray, cfg: VadConfig) -> np.ndarray:
    """Mean-square energy per analysis frame (frame_ms window, hop_ms hop)."""
    x = np.asarray(samples, dtype=np.float64)
    flen = cfg.frame_ms * SAMPLE_RATE // 1000
    hop = cfg.hop_ms * SAMPLE_RATE // 1000
    if len(x) < flen:
        return np.zeros(0)
    n_frames = 1 + (len(x) - flen) // hop
    sq = np.concatenate([[0.0], np.cumsum(x * x)])
    starts = np.arange(n_frames) * hop
    return (sq[starts + flen] - sq[starts]) / flen


class ChannelVad:
    """Streaming two-stage detector for one channel.

    Frames are pushed in order; the smoother backdates segment starts to
    the first frame of the onset run and closes segments at the last
    speech-labeled frame once the hangover run completes.
    """

    def __init__(self, cfg: VadConfig, channel: int, initial_floor: float | None = None):
        self.cfg = cfg
        self.channel = channel
        self.state = VadState(noise_floor=max(cfg.floor_min, initial_floor or cfg.floor_min))
        self.segments: list[SpeechSegment] = []
        self._frame_idx = 0
        self._run_start_ms = 0.0
        self._last_speech_frame_end = 0.0

    def _frame_times(self, idx: int) -> tuple[float, float]:
        start = idx * self.cfg.hop_ms
        return start, start + self.cfg.frame_ms

    def push(self, frame_energy: float) -> str:
        cfg, st = self.cfg, self.state
        label = classify_frame(frame_energy, st, cfg)
        f_start, f_end = self._frame_times(self._frame_idx)
        self._frame_idx += 1
        if not st.in_speech:
            if label == SPEECH:
                if st.onset_count == 0:
                    self._run_start_ms = f_start
                st.onset_count += 1
                if st.onset_count >= cfg.onset_frames:
                    st.in_speech = True
                    st.hangover_count = 0
                    self._last_speech_frame_end = f_end
            else:
                st.onset_count = 0
        else:
            if label == SPEECH:
                st.hangover_count = 0
                self._last_speech_frame_end = f_end
            else:
                st.hangover_count += 1
                if st.hangover_count >= cfg.hangover_frames:
                    self._close_segment()
        return label

    def _close_segment(self) -> None:
        st = self.state
        st.in_speech = False
        st.onset_count = 0
        st.hangover_count = 0
        st.last_speech_end_ms = self._last_speech_frame_end
        self.segments.append(
            SpeechSegment(self.channel, self._run_start_ms, self._last_speech_frame_end)
        )

    def finish(self) -> list[SpeechSegment]:
        if self.state.in_speech:
            self._close_segment()
        return self.segments


def segment(samples: np.ndarray, cfg: VadConfig = VadConfig(), channel: int = 0) -> list[SpeechSegment]:
    """Segment one channel's audio into speech intervals.

    The noise floor is calibrated from the first 100 ms (clamped at
    floor_min) before classification starts.
    """
    energies = frame_energies(samples, cfg)
    n_cal = max(1, cfg.calibration_ms // cfg.hop_ms)
    floor = float(np.mean(energies[:n_cal])) if len(energies) else cfg.floor_min
    vad = ChannelVad(cfg, channel, initial_floor=floor)
    for e in energies:
        vad.push(float(e))
    return vad.finish()


class SegmentTimeline:
    """Silence-clock view over a fixed set of speech segments."""

    def __init__(self, segments: list[SpeechSegment]):
        self.segments = sorted(segments, key=lambda s: s.start_ms)

    def silence_at(self, now_ms: float) -> float:
        """Silence duration at *now_ms*: 0 inside speech, else time since
        the most recent speech end (or since 0 if none yet)."""
        last_end = 0.0
        for seg in self.segments:
            if seg.start_ms <= now_ms < seg.end_ms:
                return 0.0
            if seg.end_ms <= now_ms:
                last_end = seg.end_ms
            else:
                break
        return now_ms - last_end
