"""Model delivery boundary: local inference or recognition-as-a-service.

Wire contract (documented in docs/wire-recognition.md): the request is
one JSON object with header fields sample_rate, config, mode, frames,
and mel_b64 holding the mel matrix as base64 row-major little-endian
32-bit floats; the response body is a JSON array of [species_id, score]
pairs ranked by descending score.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
import requests

from .audio import AudioClip, downmix, resample
from .classifier import (
    ClassificationResult,
    ClassifierConfig,
    DEFAULT_CLASSIFIER,
    SpeciesTemplate,
    _decode_matrix,
    _encode_matrix,
    build_template,
    classify_clip,
)
from .dsp import MelSpectrogram, SpectralConfig, mel_spectrogram
from .errors import InvalidParameterError, RecognitionUnavailableError
from .synth import clip_annotation, clip_seed, get_species, synthesize_call_events

MODE_ON_EDGE = "on-edge"
MODE_SERVICE = "service"


def preprocess(clip: AudioClip, config: ClassifierConfig = DEFAULT_CLASSIFIER) -> MelSpectrogram:
    """Shared preprocessing for both delivery modes: downmix, resample, mel."""
    prepared = resample(downmix(clip), config.sample_rate)
    return mel_spectrogram(prepared, config.spectral)


def encode_request(mel: MelSpectrogram, sample_rate: int, mode: str = "clip") -> dict:
    return {
        "sample_rate": int(sample_rate),
        "config": mel.config.to_dict(),
        "mode": mode,
        "frames": int(mel.n_frames),
        "mel_b64": _encode_matrix(mel.values),
    }


def decode_request(payload: dict) -> tuple[MelSpectrogram, int, str]:
    """Parse a recognition request; mel values are re-floored after the
    float32 round trip."""
    try:
        config = SpectralConfig.from_dict(payload["config"])
        frames = int(payload["frames"])
        sample_rate = int(payload["sample_rate"])
        mode = str(payload.get("mode", "clip"))
        values = _decode_matrix(payload["mel_b64"], frames, config.mel_bins)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidParameterError(f"bad recognition request: {exc}") from exc
    values = np.maximum(values, np.log(config.log_floor))
    return MelSpectrogram(values, config, frames * config.seconds_per_frame(sample_rate)), sample_rate, mode


def encode_response(result: ClassificationResult) -> list:
    return [[sid, score] for sid, score in result.ranking]


def decode_response(data: list, fallback: bool = False) -> ClassificationResult:
    try:
        ranking = tuple((str(sid), float(score)) for sid, score in data)
    except (TypeError, ValueError) as exc:
        raise InvalidParameterError(f"bad recognition response: {exc}") from exc
    for _, score in ranking:
        if not (0.0 <= score <= 1.0):
            raise InvalidParameterError(f"score {score} outside [0, 1]")
    return ClassificationResult(ranking=ranking, mode="clip", fallback=fallback)


def recognize(
    clip: AudioClip,
    templates: Sequence[SpeciesTemplate],
    mode: str = MODE_ON_EDGE,
    config: ClassifierConfig = DEFAULT_CLASSIFIER,
    endpoint: Optional[str] = None,
    fallback_enabled: bool = True,
    timeout_s: float = 5.0,
) -> ClassificationResult:
    """Classify a clip locally or via a remote recognition endpoint.

    Service mode posts the preprocessed features to `endpoint`; on any
    endpoint failure it falls back to the local path (result flagged
    fallback) unless fallback is disabled.
    """
    if mode not in (MODE_ON_EDGE, MODE_SERVICE):
        raise InvalidParameterError(f"mode must be {MODE_ON_EDGE!r} or {MODE_SERVICE!r}, got {mode!r}")
    mel = preprocess(clip, config)
    if mode == MODE_ON_EDGE:
        return classify_clip(mel, templates, config)
    try:
        if not endpoint:
            raise RecognitionUnavailableError("no recognition endpoint configured")
        resp = requests.post(endpoint, json=encode_request(mel, config.sample_rate), timeout=timeout_s)
        resp.raise_for_status()
        return decode_response(resp.json())
    except (requests.RequestException, RecognitionUnavailableError, InvalidParameterError, ValueError) as exc:
        if not fallback_enabled:
            raise RecognitionUnavailableError(f"recognition service failed: {exc}") from exc
        local = classify_clip(mel, templates, config)
        return ClassificationResult(
            ranking=local.ranking, mode=local.mode, fallback=True
        )


def build_default_templates(
    config: ClassifierConfig = DEFAULT_CLASSIFIER,
    species_count: int = 8,
    clips_per_species: int = 6,
    seed: int = 20240501,
) -> list[SpeciesTemplate]:
    """Templates trained on the synthetic registry; used when a server
    starts without a saved template file."""
    templates = []
    for k in range(species_count):
        sp = get_species(k)
        examples = []
        for i in range(clips_per_species):
            clip, events = synthesize_call_events(k, 2.0, config.sample_rate, clip_seed(seed, k, i))
            examples.append((clip, clip_annotation(events)))
        templates.append(build_template(sp.species_id, examples, config))
    return templates
