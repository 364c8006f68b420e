"""Scalar signals to sine pitch: mappings, channel routing, offline rendering.

The live path only ever transports target frequencies (the UI synthesizes
locally); `render` is the headless equivalent producing phase-continuous
stereo audio for WAV export.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .nn import NumericError

FREQ_FLOOR = 20.0
FREQ_CEIL = 8000.0
AMPLITUDE = 0.5
RAMP_SECONDS = 0.005
SAMPLE_RATE = 44100


class SonificationMode(enum.Enum):
    ACCURACY_BOTH = "accuracy"
    SPLIT = "split"  # accuracy right, loss left
    LOSS_BOTH = "loss"


@dataclass
class FrequencyMapping:
    source: str  # accuracy | loss | learning_rate | momentum
    f_min: float
    f_max: float
    domain_min: float
    domain_max: float
    scale: str = "linear"  # linear | log

    def __post_init__(self) -> None:
        if not FREQ_FLOOR <= self.f_min < self.f_max <= FREQ_CEIL:
            raise ValueError(
                f"need {FREQ_FLOOR} <= f_min < f_max <= {FREQ_CEIL}, got [{self.f_min}, {self.f_max}]"
            )
        if not self.domain_min < self.domain_max:
            raise ValueError(f"need domain_min < domain_max, got [{self.domain_min}, {self.domain_max}]")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"scale must be linear or log, got {self.scale!r}")
        if self.scale == "log" and self.domain_min <= 0:
            raise ValueError("log scale needs a positive domain_min")


def default_mappings(num_classes: int = 7) -> dict[str, FrequencyMapping]:
    """An octave-plus-fifth (220-880 Hz) per source. The loss domain tops out
    at 1.5x the uniform-prediction loss so early training stays audible."""
    ln_c = math.log(num_classes)
    return {
        "accuracy": FrequencyMapping("accuracy", 220.0, 880.0, 0.0, 1.0),
        "loss": FrequencyMapping("loss", 220.0, 880.0, 0.0, 1.5 * ln_c),
        "learning_rate": FrequencyMapping("learning_rate", 220.0, 880.0, 1e-4, 1.0, scale="log"),
        "momentum": FrequencyMapping("momentum", 220.0, 880.0, 0.0, 0.999),
    }


def map_to_freq(mapping: FrequencyMapping, value: float) -> float:
    """Clamp into the domain, then map linearly (in the value or its log)."""
    if not math.isfinite(value):
        raise NumericError(f"cannot sonify non-finite value {value}")
    v = min(max(float(value), mapping.domain_min), mapping.domain_max)
    lo, hi = mapping.domain_min, mapping.domain_max
    if mapping.scale == "log":
        v, lo, hi = math.log(v), math.log(lo), math.log(hi)
    frac = (v - lo) / (hi - lo)
    return mapping.f_min + (mapping.f_max - mapping.f_min) * frac


def route(mode: SonificationMode, freq_accuracy: float, freq_loss: float) -> tuple[float, float]:
    """(left, right) target frequencies for the active channel mode."""
    if mode is SonificationMode.ACCURACY_BOTH:
        return (freq_accuracy, freq_accuracy)
    if mode is SonificationMode.SPLIT:
        return (freq_loss, freq_accuracy)
    return (freq_loss, freq_loss)


@dataclass
class AudioFrame:
    sample_rate: int
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self) -> None:
        if len(self.left) != len(self.right):
            raise ValueError("channel lengths differ")

    @property
    def duration(self) -> float:
        return len(self.left) / self.sample_rate


Timeline = list[tuple[float, float]]  # (start time sec, frequency Hz), piecewise constant


def _channel_frequencies(timeline: Timeline, sample_rate: int, num_samples: int) -> np.ndarray:
    """Per-sample frequency for one channel; the first segment's frequency
    holds from t=0 and the last holds to the end."""
    for t, f in timeline:
        if t < 0:
            raise ValueError(f"negative timeline time {t}")
        if not FREQ_FLOOR <= f <= FREQ_CEIL:
            raise ValueError(f"frequency {f} outside [{FREQ_FLOOR}, {FREQ_CEIL}]")
    times = np.array([t for t, _ in timeline])
    freqs = np.array([f for _, f in timeline])
    if np.any(np.diff(times) < 0):
        raise ValueError("timeline times must be sorted")
    sample_times = np.arange(num_samples) / sample_rate
    seg = np.clip(np.searchsorted(times, sample_times, side="right") - 1, 0, len(timeline) - 1)
    return freqs[seg]


def render(
    left_timeline: Timeline,
    right_timeline: Timeline,
    sample_rate: int = SAMPLE_RATE,
    duration: float | None = None,
) -> AudioFrame:
    """Sine per channel with the phase accumulated across frequency changes,
    5 ms linear ramps at the ends, amplitude 0.5."""
    if not left_timeline and not right_timeline:
        return AudioFrame(sample_rate, np.zeros(0), np.zeros(0))
    if duration is None:
        duration = max((t for t, _ in left_timeline + right_timeline), default=0.0)
    num_samples = int(round(duration * sample_rate))
    if num_samples <= 0:
        return AudioFrame(sample_rate, np.zeros(0), np.zeros(0))

    channels = []
    for timeline in (left_timeline, right_timeline):
        if not timeline:
            channels.append(np.zeros(num_samples))
            continue
        freq = _channel_frequencies(timeline, sample_rate, num_samples)
        phase = 2.0 * np.pi * np.cumsum(freq) / sample_rate
        channels.append(AMPLITUDE * np.sin(phase))

    ramp_n = min(int(RAMP_SECONDS * sample_rate), num_samples // 2)
    if ramp_n > 0:
        envelope = np.ones(num_samples)
        envelope[:ramp_n] = np.linspace(0.0, 1.0, ramp_n, endpoint=False)
        envelope[-ramp_n:] = np.linspace(1.0, 0.0, ramp_n)
        channels = [c * envelope for c in channels]

    left, right = (np.clip(c, -1.0, 1.0) for c in channels)
    return AudioFrame(sample_rate, left, right)


def write_wav(frame: AudioFrame, path: str) -> None:
    """16-bit PCM stereo RIFF."""
    pcm = np.stack([frame.left, frame.right], axis=1)
    wavfile.write(path, frame.sample_rate, np.round(pcm * 32767.0).astype(np.int16))


def read_wav(path: str) -> AudioFrame:
    rate, data = wavfile.read(path)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError(f"{path}: expected stereo PCM")
    scaled = data.astype(np.float64) / 32767.0
    return AudioFrame(rate, scaled[:, 0], scaled[:, 1])
