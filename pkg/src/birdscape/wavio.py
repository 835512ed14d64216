"""RIFF WAV I/O: PCM 16-bit integer and 32-bit float, 1 or 2 channels."""

from __future__ import annotations

import io
from pathlib import Path
from typing import Union

import numpy as np
from scipy.io import wavfile

from .audio import AudioClip
from .errors import InvalidParameterError, MalformedAudioError

ANALYSIS_RATE = 22050
MIN_RATE = 16000
MAX_RATE = 48000


def load_wav(source: Union[str, Path, bytes]) -> AudioClip:
    """Decode a WAV file or byte payload into an AudioClip at its native rate.

    Float samples are clamped to [-1, 1]; PCM 16-bit is scaled by 1/32768.
    """
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    try:
        rate, data = wavfile.read(source)
    except Exception as exc:
        raise MalformedAudioError(f"not a readable WAV file: {exc}") from exc
    if data.ndim == 1:
        data = data[:, np.newaxis]
    if data.shape[1] not in (1, 2):
        raise MalformedAudioError(f"unsupported channel count {data.shape[1]}")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = np.clip(data.astype(np.float64), -1.0, 1.0)
    else:
        raise MalformedAudioError(f"unsupported sample format {data.dtype}")
    if data.shape[0] == 0:
        raise MalformedAudioError("WAV contains no samples")
    return AudioClip(samples, int(rate))


def save_wav(path: Union[str, Path], clip: AudioClip, sample_format: str = "float32") -> None:
    """Write a clip as PCM16 or 32-bit float WAV."""
    if sample_format == "float32":
        data = clip.samples.astype(np.float32)
    elif sample_format == "pcm16":
        data = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype(np.int16)
    else:
        raise InvalidParameterError(f"sample_format must be 'float32' or 'pcm16', got {sample_format!r}")
    if clip.channels == 1:
        data = data[:, 0]
    wavfile.write(str(path), clip.sample_rate, data)


def wav_bytes(clip: AudioClip, sample_format: str = "float32") -> bytes:
    """Encode a clip as in-memory WAV bytes."""
    buf = io.BytesIO()
    if sample_format == "float32":
        data = clip.samples.astype(np.float32)
    elif sample_format == "pcm16":
        data = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype(np.int16)
    else:
        raise InvalidParameterError(f"sample_format must be 'float32' or 'pcm16', got {sample_format!r}")
    if clip.channels == 1:
        data = data[:, 0]
    wavfile.write(buf, clip.sample_rate, data)
    return buf.getvalue()
