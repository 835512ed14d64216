"""Deterministic synthetic bird-call generator and corpus builder.

Each synthetic species is a warbling trill confined to its own
frequency band, disjoint from every other species, with a
species-specific repetition (tremolo) rate and warble speed. The
signature is continuous in time, so templates built from annotations of
any length stay representative after time normalization, which makes
classifier accuracy checkable without a labeled wildlife corpus.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import Annotation, AudioClip
from .errors import InvalidParameterError, UnknownSpeciesError
from .wavio import save_wav


@dataclass(frozen=True)
class SyntheticSpecies:
    index: int
    species_id: str
    center_hz: float
    sweep_hz: float
    calls_per_second: float  # tremolo repetition rate
    warble_hz: float  # FM rate of the trill

    @property
    def band_hz(self) -> tuple[float, float]:
        # 50 Hz margin absorbs per-clip center jitter and envelope spread.
        return (self.center_hz - self.sweep_hz / 2 - 50.0, self.center_hz + self.sweep_hz / 2 + 50.0)


SPECIES: tuple[SyntheticSpecies, ...] = tuple(
    SyntheticSpecies(
        index=k,
        species_id=f"synth-{k:02d}",
        center_hz=1400.0 + 650.0 * k,
        sweep_hz=300.0,
        calls_per_second=1.6 + 0.25 * k,
        warble_hz=6.0 + 0.8 * k,
    )
    for k in range(10)
)

NOISE_FLOOR_AMP = 0.003
CALL_AMP = 0.35
TREMOLO_DEPTH = 0.35
EDGE_RAMP_S = 0.02
MIN_DURATION_S = 0.2


def get_species(species_index: int) -> SyntheticSpecies:
    if not (isinstance(species_index, (int, np.integer)) and 0 <= species_index < len(SPECIES)):
        raise UnknownSpeciesError(
            f"species_index {species_index!r} not in registry of {len(SPECIES)}"
        )
    return SPECIES[int(species_index)]


def species_id_for(species_index: int) -> str:
    return get_species(species_index).species_id


def synthesize_call_events(
    species_index: int, duration_s: float, sample_rate: int, seed: int
) -> tuple[AudioClip, list[Annotation]]:
    """Render a trill plus the annotation of the voiced span it placed."""
    sp = get_species(species_index)
    if not (duration_s >= MIN_DURATION_S) or not (sample_rate > 0):
        raise InvalidParameterError(
            f"need duration >= {MIN_DURATION_S}s and positive rate, got {duration_s}s at {sample_rate} Hz"
        )
    if sp.band_hz[1] >= sample_rate / 2:
        raise InvalidParameterError(
            f"species {sp.species_id} band {sp.band_hz} exceeds Nyquist at {sample_rate} Hz"
        )
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(sp.index,)))
    n = int(round(duration_s * sample_rate))
    out = rng.standard_normal(n) * NOISE_FLOOR_AMP
    start = 0.03 + rng.uniform(0.0, 0.02)
    end = duration_s - 0.03 - rng.uniform(0.0, 0.02)
    a, b = int(round(start * sample_rate)), int(round(end * sample_rate))
    m = b - a
    t = np.arange(m) / sample_rate
    center = sp.center_hz + rng.uniform(-15.0, 15.0)
    # Instantaneous frequency warbles inside the band; phase integrates it.
    inst = center + (sp.sweep_hz / 2) * np.sin(2 * np.pi * sp.warble_hz * t + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * np.cumsum(inst) / sample_rate + rng.uniform(0, 2 * np.pi)
    tremolo = 1.0 - TREMOLO_DEPTH * (
        0.5 + 0.5 * np.sin(2 * np.pi * sp.calls_per_second * t + rng.uniform(0, 2 * np.pi))
    )
    ramp = int(EDGE_RAMP_S * sample_rate)
    edge = np.minimum(1.0, np.minimum(np.arange(m), m - 1 - np.arange(m)) / max(ramp, 1))
    amp = CALL_AMP * rng.uniform(0.9, 1.1)
    out[a:b] += amp * tremolo * edge * np.sin(phase)
    clip = AudioClip(np.clip(out, -1.0, 1.0), sample_rate)
    return clip, [Annotation(start, end, sp.band_hz[0], sp.band_hz[1])]


def synthesize_call(species_index: int, duration_s: float, sample_rate: int, seed: int) -> AudioClip:
    """Deterministic trill for (species, seed); see synthesize_call_events."""
    clip, _ = synthesize_call_events(species_index, duration_s, sample_rate, seed)
    return clip


def clip_annotation(events: list[Annotation]) -> Annotation:
    """Single annotation spanning all events, keeping the species band."""
    if not events:
        raise InvalidParameterError("no call events to annotate")
    return Annotation(
        min(e.start_s for e in events),
        max(e.end_s for e in events),
        events[0].fmin_hz,
        events[0].fmax_hz,
    )


def clip_seed(corpus_seed: int, species_index: int, clip_index: int) -> int:
    """Stable per-clip seed derived from the corpus seed."""
    return int(
        np.random.SeedSequence(entropy=corpus_seed, spawn_key=(species_index, clip_index)).generate_state(1)[0]
    )


def build_corpus(
    out_dir: str | Path,
    species_count: int,
    clips_per_species: int,
    seed: int,
    duration_s: float = 2.0,
    sample_rate: int = 22050,
) -> dict:
    """Write a labeled WAV corpus plus manifest.json; returns the manifest."""
    if not (1 <= species_count <= len(SPECIES)):
        raise InvalidParameterError(
            f"species_count must be in [1, {len(SPECIES)}], got {species_count}"
        )
    if clips_per_species < 1:
        raise InvalidParameterError(f"clips_per_species must be >= 1, got {clips_per_species}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "seed": seed,
        "sample_rate": sample_rate,
        "clip_duration_s": duration_s,
        "species": [
            {"index": sp.index, "species_id": sp.species_id, "band_hz": list(sp.band_hz)}
            for sp in SPECIES[:species_count]
        ],
        "clips": [],
    }
    for sp in SPECIES[:species_count]:
        for i in range(clips_per_species):
            cseed = clip_seed(seed, sp.index, i)
            clip, events = synthesize_call_events(sp.index, duration_s, sample_rate, cseed)
            ann = clip_annotation(events)
            fname = f"{sp.species_id}_{i:03d}.wav"
            save_wav(out / fname, clip, sample_format="pcm16")
            manifest["clips"].append(
                {
                    "file": fname,
                    "species_index": sp.index,
                    "species_id": sp.species_id,
                    "seed": cseed,
                    "annotation": ann.to_dict(),
                }
            )
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest


def load_manifest(corpus_dir: str | Path) -> dict:
    path = Path(corpus_dir) / "manifest.json"
    if not path.exists():
        raise InvalidParameterError(f"no manifest.json in {corpus_dir}")
    return json.loads(path.read_text())
