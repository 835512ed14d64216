"""Species recognition by normalized cross-correlation template matching.

Templates are mean standardized mel patches; a clip's score for a
species is the best Pearson correlation between any sliding window of
its mel spectrogram and that species' template, mapped from [-1, 1] to
[0, 1] via (r + 1) / 2. Degenerate (constant) windows score 0.5.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .audio import Annotation, AudioClip, downmix, resample
from .dsp import DEFAULT_SPECTRAL, MelSpectrogram, SpectralConfig, mel_spectrogram
from .errors import InvalidParameterError
from .wavio import ANALYSIS_RATE

DEFAULT_CONFIDENCE_THRESHOLD = 0.65


@dataclass(frozen=True)
class ClassifierConfig:
    spectral: SpectralConfig = DEFAULT_SPECTRAL
    sample_rate: int = ANALYSIS_RATE
    template_duration_s: float = 1.0

    @property
    def template_frames(self) -> int:
        n = self.spectral.frame_count(int(round(self.template_duration_s * self.sample_rate)))
        if n < 1:
            raise InvalidParameterError("template duration shorter than one analysis window")
        return n


DEFAULT_CLASSIFIER = ClassifierConfig()


@dataclass(frozen=True)
class SpeciesTemplate:
    species_id: str
    values: np.ndarray  # (template_frames, mel_bins), standardized-patch mean
    band_hz: tuple[float, float]
    training_clip_count: int

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if arr.ndim != 2:
            raise InvalidParameterError(f"template must be 2-D, got shape {np.shape(self.values)}")
        if not np.all(np.isfinite(arr)):
            raise InvalidParameterError("template contains non-finite values")
        if self.training_clip_count < 1:
            raise InvalidParameterError("training_clip_count must be >= 1")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "band_hz", (float(self.band_hz[0]), float(self.band_hz[1])))


@dataclass(frozen=True)
class ClassificationResult:
    ranking: tuple[tuple[str, float], ...]  # (species_id, score), descending
    mode: str  # "clip" or "frames"
    frame_scores: Optional[np.ndarray] = None  # (windows, species) when frame-wise
    species_order: tuple[str, ...] = ()
    seconds_per_frame: float = 0.0
    window_span_s: float = 0.0
    fallback: bool = False

    @property
    def top1(self) -> tuple[str, float]:
        return self.ranking[0]

    def score_for(self, species_id: str) -> float:
        for sid, score in self.ranking:
            if sid == species_id:
                return score
        return 0.0

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "ranking": [[sid, score] for sid, score in self.ranking],
            "fallback": self.fallback,
        }


def _standardize(patch: np.ndarray) -> np.ndarray:
    mu = patch.mean()
    sigma = patch.std()
    if sigma == 0.0:
        return np.zeros_like(patch)
    return (patch - mu) / sigma


def _resample_frames(patch: np.ndarray, target_frames: int) -> np.ndarray:
    """Linear interpolation along the frame axis to a fixed length."""
    n = patch.shape[0]
    if n == target_frames:
        return patch
    src = np.linspace(0.0, 1.0, n)
    dst = np.linspace(0.0, 1.0, target_frames)
    out = np.empty((target_frames, patch.shape[1]))
    for b in range(patch.shape[1]):
        out[:, b] = np.interp(dst, src, patch[:, b])
    return out


def _annotation_patch(clip: AudioClip, ann: Annotation, config: ClassifierConfig) -> np.ndarray:
    ann.validate_within(clip)
    prepared = resample(downmix(clip), config.sample_rate)
    a = int(round(ann.start_s * config.sample_rate))
    b = int(round(ann.end_s * config.sample_rate))
    # Widen spans tighter than one window so they stay analyzable.
    if b - a < config.spectral.window_length:
        b = min(prepared.n_frames, a + config.spectral.window_length)
        a = max(0, b - config.spectral.window_length)
    segment = AudioClip(prepared.samples[a:b], config.sample_rate)
    return mel_spectrogram(segment, config.spectral).values


def build_template(
    species_id: str,
    clips: Sequence[tuple[AudioClip, Annotation]],
    config: ClassifierConfig = DEFAULT_CLASSIFIER,
) -> SpeciesTemplate:
    """Mean of per-annotation mel patches, each time-normalized then standardized."""
    if not clips:
        raise InvalidParameterError(f"no annotated clips for species {species_id!r}")
    patches = []
    bands = []
    for clip, ann in clips:
        patch = _annotation_patch(clip, ann, config)
        patches.append(_standardize(_resample_frames(patch, config.template_frames)))
        if ann.fmin_hz is not None:
            bands.append((ann.fmin_hz, ann.fmax_hz))
    band = (
        (min(b[0] for b in bands), max(b[1] for b in bands))
        if bands
        else (config.spectral.fmin_hz, config.spectral.fmax_hz)
    )
    template = np.mean(patches, axis=0)
    return SpeciesTemplate(species_id, template, band, len(clips))


def _window_score_matrix(
    mel: MelSpectrogram, templates: Sequence[SpeciesTemplate], config: ClassifierConfig
) -> np.ndarray:
    """Score of every sliding window against every template, (windows, species)."""
    if not templates:
        raise InvalidParameterError("no templates to classify against")
    L = config.template_frames
    for t in templates:
        if t.values.shape != (L, config.spectral.mel_bins):
            raise InvalidParameterError(
                f"template {t.species_id} shape {t.values.shape} does not match config {(L, config.spectral.mel_bins)}"
            )
    values = mel.values
    if values.shape[0] < L:
        floor = np.log(mel.config.log_floor)
        pad = np.full((L - values.shape[0], values.shape[1]), floor)
        values = np.vstack([values, pad])
    n_windows = values.shape[0] - L + 1
    windows = np.lib.stride_tricks.sliding_window_view(values, (L, values.shape[1]))[:, 0]
    flat = windows.reshape(n_windows, -1)
    centered = flat - flat.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    t_flat = np.stack([t.values.reshape(-1) for t in templates])
    t_centered = t_flat - t_flat.mean(axis=1, keepdims=True)
    t_norms = np.linalg.norm(t_centered, axis=1)
    dots = centered @ t_centered.T
    denom = np.outer(norms, t_norms)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 0, dots / np.where(denom > 0, denom, 1.0), 0.0)
    return (np.clip(r, -1.0, 1.0) + 1.0) / 2.0


def _rank(scores_by_species: dict[str, float]) -> tuple[tuple[str, float], ...]:
    return tuple(sorted(scores_by_species.items(), key=lambda kv: (-kv[1], kv[0])))


def classify_clip(
    mel: MelSpectrogram,
    templates: Sequence[SpeciesTemplate],
    config: ClassifierConfig = DEFAULT_CLASSIFIER,
) -> ClassificationResult:
    """Best sliding-window score per species, ranked descending."""
    matrix = _window_score_matrix(mel, templates, config)
    best = matrix.max(axis=0)
    ranking = _rank({t.species_id: float(s) for t, s in zip(templates, best)})
    return ClassificationResult(ranking=ranking, mode="clip")


def classify_frames(
    mel: MelSpectrogram,
    templates: Sequence[SpeciesTemplate],
    config: ClassifierConfig = DEFAULT_CLASSIFIER,
    sample_rate: int = ANALYSIS_RATE,
) -> ClassificationResult:
    """Per-window score matrix; row t is the window starting at frame t.

    The per-species max over rows equals the clip-wise score exactly.
    """
    matrix = _window_score_matrix(mel, templates, config)
    best = matrix.max(axis=0)
    ranking = _rank({t.species_id: float(s) for t, s in zip(templates, best)})
    return ClassificationResult(
        ranking=ranking,
        mode="frames",
        frame_scores=matrix,
        species_order=tuple(t.species_id for t in templates),
        seconds_per_frame=mel.config.seconds_per_frame(sample_rate),
        window_span_s=config.template_frames * mel.config.seconds_per_frame(sample_rate),
    )


def detect_events(
    result: ClassificationResult,
    threshold: float,
    min_duration_s: float,
    species_id: Optional[str] = None,
) -> list[Annotation]:
    """Maximal runs of window scores >= threshold, as time intervals.

    A window score covers the window's whole span, so each run maps to
    [first window start, last window end]; overlapping intervals are
    merged, then intervals shorter than min_duration_s dropped. Output
    is disjoint and sorted by start time.
    """
    if not (0.0 <= threshold <= 1.0):
        raise InvalidParameterError(f"threshold must be in [0, 1], got {threshold}")
    if result.frame_scores is None:
        raise InvalidParameterError("detect_events needs a frame-wise result")
    if species_id is None:
        species_id = result.top1[0]
    if species_id not in result.species_order:
        raise InvalidParameterError(f"no frame scores for species {species_id!r}")
    col = result.frame_scores[:, result.species_order.index(species_id)]
    spf = result.seconds_per_frame
    span = result.window_span_s
    raw: list[tuple[float, float]] = []
    start = None
    for t, score in enumerate(col):
        if score >= threshold and start is None:
            start = t
        elif score < threshold and start is not None:
            raw.append((start * spf, (t - 1) * spf + span))
            start = None
    if start is not None:
        raw.append((start * spf, (len(col) - 1) * spf + span))
    merged: list[list[float]] = []
    for a, b in raw:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [Annotation(a, b) for a, b in merged if b - a >= min_duration_s]


@dataclass(frozen=True)
class EvalReport:
    per_species_ap: dict[str, float]
    mean_ap: float
    precision_at_threshold: float
    recall_at_threshold: float
    threshold: float
    top1_accuracy: float
    excluded_species: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "per_species_ap": dict(sorted(self.per_species_ap.items())),
            "mean_ap": self.mean_ap,
            "precision_at_threshold": self.precision_at_threshold,
            "recall_at_threshold": self.recall_at_threshold,
            "threshold": self.threshold,
            "top1_accuracy": self.top1_accuracy,
            "excluded_species": list(self.excluded_species),
        }


def evaluate(
    predictions: Sequence[ClassificationResult],
    truth: Sequence[str],
    threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
) -> EvalReport:
    """Ranked-retrieval AP per species plus thresholded precision/recall.

    AP for a species ranks all clips by that species' score and averages
    precision at each true positive. Precision/recall counts a clip as
    decided when its top-1 score clears the threshold, and correct when
    the decided species matches truth.
    """
    if len(predictions) != len(truth):
        raise InvalidParameterError(
            f"{len(predictions)} predictions vs {len(truth)} truth labels"
        )
    if not predictions:
        raise InvalidParameterError("nothing to evaluate")
    truth = list(truth)
    positive_species = sorted(set(truth))
    ranked_species = sorted({sid for p in predictions for sid, _ in p.ranking})
    excluded = tuple(s for s in ranked_species if s not in positive_species)
    per_ap: dict[str, float] = {}
    for s in positive_species:
        scores = np.array([p.score_for(s) for p in predictions])
        order = np.argsort(-scores, kind="stable")
        hits = 0
        precisions = []
        for rank, idx in enumerate(order, start=1):
            if truth[idx] == s:
                hits += 1
                precisions.append(hits / rank)
        per_ap[s] = float(np.mean(precisions))
    decided = [(p.top1, t) for p, t in zip(predictions, truth) if p.top1[1] >= threshold]
    correct_decided = sum(1 for (sid, _), t in decided if sid == t)
    precision = correct_decided / len(decided) if decided else 0.0
    recall = correct_decided / len(truth)
    top1 = sum(1 for p, t in zip(predictions, truth) if p.top1[0] == t) / len(truth)
    return EvalReport(
        per_species_ap=per_ap,
        mean_ap=float(np.mean(list(per_ap.values()))),
        precision_at_threshold=precision,
        recall_at_threshold=recall,
        threshold=threshold,
        top1_accuracy=top1,
        excluded_species=excluded,
    )


def _encode_matrix(values: np.ndarray) -> str:
    return base64.b64encode(values.astype("<f4").tobytes(order="C")).decode("ascii")


def _decode_matrix(b64: str, frames: int, bins: int) -> np.ndarray:
    raw = base64.b64decode(b64.encode("ascii"))
    expected = frames * bins * 4
    if len(raw) != expected:
        raise InvalidParameterError(f"matrix payload is {len(raw)} bytes, expected {expected}")
    return np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(frames, bins)


def save_templates(path: str | Path, templates: Sequence[SpeciesTemplate], config: ClassifierConfig) -> None:
    """Persist templates as JSON with base64 row-major float32 matrices."""
    doc = {
        "sample_rate": config.sample_rate,
        "template_duration_s": config.template_duration_s,
        "config": config.spectral.to_dict(),
        "templates": [
            {
                "species_id": t.species_id,
                "band_hz": list(t.band_hz),
                "training_clip_count": t.training_clip_count,
                "frames": t.values.shape[0],
                "mel_bins": t.values.shape[1],
                "values_b64": _encode_matrix(t.values),
            }
            for t in templates
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2))


def load_templates(path: str | Path) -> tuple[list[SpeciesTemplate], ClassifierConfig]:
    doc = json.loads(Path(path).read_text())
    config = ClassifierConfig(
        spectral=SpectralConfig.from_dict(doc["config"]),
        sample_rate=int(doc["sample_rate"]),
        template_duration_s=float(doc["template_duration_s"]),
    )
    templates = [
        SpeciesTemplate(
            species_id=t["species_id"],
            values=_decode_matrix(t["values_b64"], t["frames"], t["mel_bins"]),
            band_hz=tuple(t["band_hz"]),
            training_clip_count=int(t["training_clip_count"]),
        )
        for t in doc["templates"]
    ]
    return templates, config
