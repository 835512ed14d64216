"""Time-frequency analysis: short-time transform, mel filterbank, band-pass.

Frames are taken without centering or padding, so a clip of n samples
yields floor((n - window_length) / hop_length) + 1 frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioClip
from .errors import InvalidParameterError, TooShortError


@dataclass(frozen=True)
class SpectralConfig:
    window_length: int = 1024
    hop_length: int = 256
    mel_bins: int = 48
    fmin_hz: float = 500.0
    fmax_hz: float = 8000.0
    log_floor: float = 1e-10

    def __post_init__(self):
        if not (0 < self.hop_length <= self.window_length):
            raise InvalidParameterError(
                f"need 0 < hop_length <= window_length, got hop={self.hop_length} window={self.window_length}"
            )
        if self.mel_bins < 2:
            raise InvalidParameterError(f"mel_bins must be >= 2, got {self.mel_bins}")
        if not (0 <= self.fmin_hz < self.fmax_hz):
            raise InvalidParameterError(
                f"need 0 <= fmin < fmax, got fmin={self.fmin_hz} fmax={self.fmax_hz}"
            )
        if not (self.log_floor > 0):
            raise InvalidParameterError(f"log_floor must be > 0, got {self.log_floor}")

    def frame_count(self, n_samples: int) -> int:
        if n_samples < self.window_length:
            return 0
        return (n_samples - self.window_length) // self.hop_length + 1

    def seconds_per_frame(self, sample_rate: int) -> float:
        return self.hop_length / sample_rate

    def to_dict(self) -> dict:
        return {
            "window_length": self.window_length,
            "hop_length": self.hop_length,
            "mel_bins": self.mel_bins,
            "fmin_hz": self.fmin_hz,
            "fmax_hz": self.fmax_hz,
            "log_floor": self.log_floor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralConfig":
        return cls(
            window_length=int(d["window_length"]),
            hop_length=int(d["hop_length"]),
            mel_bins=int(d["mel_bins"]),
            fmin_hz=float(d["fmin_hz"]),
            fmax_hz=float(d["fmax_hz"]),
            log_floor=float(d["log_floor"]),
        )


DEFAULT_SPECTRAL = SpectralConfig()


@dataclass(frozen=True)
class MelSpectrogram:
    values: np.ndarray  # (frames, mel_bins) log-energies
    config: SpectralConfig
    origin_clip_duration: float

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if arr.ndim != 2 or arr.shape[1] != self.config.mel_bins:
            raise InvalidParameterError(
                f"values must be (frames, {self.config.mel_bins}), got {np.shape(self.values)}"
            )
        floor = np.log(self.config.log_floor)
        if arr.size and arr.min() < floor - 1e-12:
            raise InvalidParameterError("log-energies below log(log_floor)")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies(config: SpectralConfig) -> np.ndarray:
    """Peak frequency of each triangular filter, in Hz."""
    pts = mel_to_hz(np.linspace(hz_to_mel(config.fmin_hz), hz_to_mel(config.fmax_hz), config.mel_bins + 2))
    return pts[1:-1]


def mel_filterbank(config: SpectralConfig, sample_rate: int) -> np.ndarray:
    """Bandwidth-normalized triangular filters over rfft bins in [fmin, fmax].

    Shape (mel_bins, window_length // 2 + 1). Each triangle is scaled by
    2 / bandwidth so white noise comes out flat across mel bins; all
    weights stay well below 1.
    """
    if config.fmax_hz > sample_rate / 2 + 1e-9:
        raise InvalidParameterError(
            f"fmax {config.fmax_hz} exceeds Nyquist {sample_rate / 2} at rate {sample_rate}"
        )
    n_bins = config.window_length // 2 + 1
    fft_freqs = np.arange(n_bins) * sample_rate / config.window_length
    pts = mel_to_hz(np.linspace(hz_to_mel(config.fmin_hz), hz_to_mel(config.fmax_hz), config.mel_bins + 2))
    bank = np.zeros((config.mel_bins, n_bins))
    for m in range(config.mel_bins):
        lo, center, hi = pts[m], pts[m + 1], pts[m + 2]
        rising = (fft_freqs - lo) / (center - lo)
        falling = (hi - fft_freqs) / (hi - center)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, 1.0) * (2.0 / (hi - lo))
    return bank


def frame_signal(x: np.ndarray, config: SpectralConfig) -> np.ndarray:
    """Slice a 1-D signal into (n_frames, window_length) without padding."""
    n = config.frame_count(len(x))
    if n == 0:
        raise TooShortError(
            f"clip of {len(x)} samples is shorter than one window ({config.window_length})"
        )
    view = np.lib.stride_tricks.sliding_window_view(x, config.window_length)
    return view[:: config.hop_length][:n]


def hann_window(length: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(length) / length)


def mel_spectrogram(clip: AudioClip, config: SpectralConfig = DEFAULT_SPECTRAL) -> MelSpectrogram:
    """Log mel-band energies of a clip; binaural input is downmixed first.

    Magnitude spectra are normalized by the window sum before the
    filterbank, and energies floored at log_floor before the log.
    """
    x = clip.mono()
    frames = frame_signal(x, config)
    window = hann_window(config.window_length)
    spectra = np.abs(np.fft.rfft(frames * window, axis=1)) / window.sum()
    bank = mel_filterbank(config, clip.sample_rate)
    energies = spectra @ bank.T
    values = np.log(np.maximum(energies, config.log_floor))
    return MelSpectrogram(values, config, clip.duration_s)


def _edge_mask(freqs: np.ndarray, fmin: float, fmax: float, nyquist: float) -> np.ndarray:
    """Raised-cosine band mask: unity in [fmin, fmax], half-octave skirts."""
    mask = np.zeros_like(freqs)
    inside = (freqs >= fmin) & (freqs <= fmax)
    mask[inside] = 1.0
    if fmin > 0:
        lo_start = fmin / np.sqrt(2.0)
        rise = (freqs > lo_start) & (freqs < fmin)
        mask[rise] = 0.5 - 0.5 * np.cos(np.pi * (freqs[rise] - lo_start) / (fmin - lo_start))
    hi_stop = min(fmax * np.sqrt(2.0), nyquist)
    if hi_stop > fmax:
        fall = (freqs > fmax) & (freqs < hi_stop)
        mask[fall] = 0.5 + 0.5 * np.cos(np.pi * (freqs[fall] - fmax) / (hi_stop - fmax))
    return mask


def band_pass(clip: AudioClip, fmin: float, fmax: float) -> AudioClip:
    """Zero-phase band-pass by spectral masking with raised-cosine skirts.

    Out-of-band energy one octave beyond the edges is fully zeroed, so
    attenuation there is limited only by spectral leakage; event timing
    is preserved exactly.
    """
    nyquist = clip.sample_rate / 2.0
    if not (0 <= fmin < fmax <= nyquist + 1e-9):
        raise InvalidParameterError(
            f"need 0 <= fmin < fmax <= Nyquist ({nyquist}), got fmin={fmin} fmax={fmax}"
        )
    n = clip.n_frames
    freqs = np.fft.rfftfreq(n, d=1.0 / clip.sample_rate)
    mask = _edge_mask(freqs, float(fmin), float(fmax), nyquist)
    out = np.empty_like(clip.samples)
    for ch in range(clip.channels):
        spectrum = np.fft.rfft(clip.samples[:, ch])
        out[:, ch] = np.fft.irfft(spectrum * mask, n=n)
    out = np.clip(out, -1.0, 1.0)
    return AudioClip(out, clip.sample_rate, clip.capture_gain_db)
