"""Audio clip representation, gain, downmix, and resampling.

Clips are immutable: samples are a read-only float64 array of shape
(n_frames, channels) with channels 1 (mono) or 2 (binaural) and every
value in [-1, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int
    capture_gain_db: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, np.newaxis]
        if arr.ndim != 2 or arr.shape[1] not in (1, 2):
            raise InvalidParameterError(
                f"samples must be (n,) mono or (n, 1|2), got shape {np.shape(self.samples)}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidParameterError("samples contain non-finite values")
        if arr.size and (arr.min() < -1.0 or arr.max() > 1.0):
            raise InvalidParameterError("samples exceed [-1, 1]")
        if not (isinstance(self.sample_rate, (int, np.integer)) and self.sample_rate > 0):
            raise InvalidParameterError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        if not math.isfinite(self.capture_gain_db):
            raise InvalidParameterError("capture_gain_db must be finite")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def channels(self) -> int:
        return self.samples.shape[1]

    @property
    def n_frames(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.sample_rate

    def mono(self) -> np.ndarray:
        """Channel mean as a 1-D array; identity for mono clips."""
        if self.channels == 1:
            return self.samples[:, 0]
        return self.samples.mean(axis=1)


@dataclass(frozen=True)
class Annotation:
    """Time interval within a clip, optionally bounded in frequency."""

    start_s: float
    end_s: float
    fmin_hz: float | None = None
    fmax_hz: float | None = None

    def __post_init__(self):
        if not (0 <= self.start_s < self.end_s):
            raise InvalidParameterError(
                f"need 0 <= start < end, got start={self.start_s} end={self.end_s}"
            )
        if (self.fmin_hz is None) != (self.fmax_hz is None):
            raise InvalidParameterError("frequency bounds must be given together")
        if self.fmin_hz is not None and not (self.fmin_hz < self.fmax_hz):
            raise InvalidParameterError(
                f"need fmin < fmax, got fmin={self.fmin_hz} fmax={self.fmax_hz}"
            )

    def validate_within(self, clip: AudioClip) -> None:
        if self.end_s > clip.duration_s + 1e-9:
            raise InvalidParameterError(
                f"annotation end {self.end_s}s beyond clip duration {clip.duration_s}s"
            )

    def to_dict(self) -> dict:
        return {
            "start_s": self.start_s,
            "end_s": self.end_s,
            "fmin_hz": self.fmin_hz,
            "fmax_hz": self.fmax_hz,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Annotation":
        return cls(
            start_s=float(d["start_s"]),
            end_s=float(d["end_s"]),
            fmin_hz=None if d.get("fmin_hz") is None else float(d["fmin_hz"]),
            fmax_hz=None if d.get("fmax_hz") is None else float(d["fmax_hz"]),
        )


def apply_gain(clip: AudioClip, gain_db: float) -> AudioClip:
    """Scale samples by 10^(gain_db/20) and clamp to [-1, 1]."""
    if not isinstance(gain_db, (int, float)) or not math.isfinite(gain_db):
        raise InvalidParameterError(f"gain_db must be finite, got {gain_db!r}")
    factor = 10.0 ** (gain_db / 20.0)
    scaled = np.clip(clip.samples * factor, -1.0, 1.0)
    return AudioClip(scaled, clip.sample_rate, clip.capture_gain_db)


def downmix(clip: AudioClip) -> AudioClip:
    """Binaural to mono by channel mean; mono clips pass through unchanged."""
    if clip.channels == 1:
        return clip
    return AudioClip(clip.mono(), clip.sample_rate, clip.capture_gain_db)


def to_stereo(clip: AudioClip) -> AudioClip:
    """Mono to two identical channels; stereo clips pass through unchanged."""
    if clip.channels == 2:
        return clip
    return AudioClip(
        np.repeat(clip.samples, 2, axis=1), clip.sample_rate, clip.capture_gain_db
    )


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Linear-interpolation resampling to target_rate."""
    if not (isinstance(target_rate, (int, np.integer)) and target_rate > 0):
        raise InvalidParameterError(f"target_rate must be a positive integer, got {target_rate!r}")
    target_rate = int(target_rate)
    if target_rate == clip.sample_rate:
        return clip
    n_out = max(1, int(round(clip.n_frames * target_rate / clip.sample_rate)))
    t_in = np.arange(clip.n_frames) / clip.sample_rate
    t_out = np.arange(n_out) / target_rate
    out = np.empty((n_out, clip.channels))
    for ch in range(clip.channels):
        out[:, ch] = np.interp(t_out, t_in, clip.samples[:, ch])
    return AudioClip(out, target_rate, clip.capture_gain_db)
