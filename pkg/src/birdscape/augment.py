"""Data jitter for training robustness, in the audio and mel domains.

Descriptors pair with the value they transform: NoiseSpec and
TimeShiftSpec apply to AudioClip, TimeMaskSpec and FreqMaskSpec to
MelSpectrogram. Output always keeps the input's shape, duration,
sample rate, and config.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .audio import AudioClip
from .dsp import MelSpectrogram
from .errors import InvalidParameterError


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white noise at a target clip-to-noise SNR in dB."""

    snr_db: float
    seed: int = 0


@dataclass(frozen=True)
class TimeShiftSpec:
    """Circular shift of the waveform by a sample count."""

    shift_samples: int


@dataclass(frozen=True)
class TimeMaskSpec:
    """Zero out a run of frames (set to the log floor)."""

    width_frames: int
    start_frame: Optional[int] = None
    seed: int = 0


@dataclass(frozen=True)
class FreqMaskSpec:
    """Zero out a run of mel bins (set to the log floor)."""

    width_bins: int
    start_bin: Optional[int] = None
    seed: int = 0


AugmentSpec = Union[NoiseSpec, TimeShiftSpec, TimeMaskSpec, FreqMaskSpec]


def _add_noise(clip: AudioClip, spec: NoiseSpec) -> AudioClip:
    rms = float(np.sqrt(np.mean(clip.samples**2)))
    if rms == 0.0:
        raise InvalidParameterError("cannot target an SNR against silent audio")
    if not np.isfinite(spec.snr_db):
        raise InvalidParameterError(f"snr_db must be finite, got {spec.snr_db!r}")
    rng = np.random.default_rng(spec.seed)
    noise = rng.standard_normal(clip.samples.shape)
    target_noise_rms = rms / (10.0 ** (spec.snr_db / 20.0))
    noise *= target_noise_rms / np.sqrt(np.mean(noise**2))
    return AudioClip(np.clip(clip.samples + noise, -1.0, 1.0), clip.sample_rate, clip.capture_gain_db)


def _time_shift(clip: AudioClip, spec: TimeShiftSpec) -> AudioClip:
    shifted = np.roll(clip.samples, spec.shift_samples, axis=0)
    return AudioClip(shifted, clip.sample_rate, clip.capture_gain_db)


def _mask_axis(mel: MelSpectrogram, width: int, start: Optional[int], seed: int, axis: int) -> MelSpectrogram:
    size = mel.values.shape[axis]
    if not (0 <= width <= size):
        raise InvalidParameterError(f"mask width {width} exceeds axis length {size}")
    if width == 0:
        return mel
    if start is None:
        start = int(np.random.default_rng(seed).integers(0, size - width + 1))
    if not (0 <= start and start + width <= size):
        raise InvalidParameterError(f"mask [{start}, {start + width}) outside axis of {size}")
    values = mel.values.copy()
    floor = np.log(mel.config.log_floor)
    if axis == 0:
        values[start : start + width, :] = floor
    else:
        values[:, start : start + width] = floor
    return MelSpectrogram(values, mel.config, mel.origin_clip_duration)


def augment(x: Union[AudioClip, MelSpectrogram], spec: AugmentSpec) -> Union[AudioClip, MelSpectrogram]:
    """Apply one augmentation descriptor; returns the same type as x."""
    if isinstance(x, AudioClip):
        if isinstance(spec, NoiseSpec):
            return _add_noise(x, spec)
        if isinstance(spec, TimeShiftSpec):
            return _time_shift(x, spec)
        raise InvalidParameterError(f"{type(spec).__name__} does not apply to audio")
    if isinstance(x, MelSpectrogram):
        if isinstance(spec, TimeMaskSpec):
            return _mask_axis(x, spec.width_frames, spec.start_frame, spec.seed, axis=0)
        if isinstance(spec, FreqMaskSpec):
            return _mask_axis(x, spec.width_bins, spec.start_bin, spec.seed, axis=1)
        raise InvalidParameterError(f"{type(spec).__name__} does not apply to mel spectrograms")
    raise InvalidParameterError(f"cannot augment {type(x).__name__}")
