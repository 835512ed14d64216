import json

import numpy as np
import pytest

from birdscape.errors import InvalidParameterError, UnknownSpeciesError
from birdscape.synth import (
    SPECIES,
    build_corpus,
    clip_annotation,
    load_manifest,
    synthesize_call,
    synthesize_call_events,
)


def spectral_centroid(clip):
    power = np.abs(np.fft.rfft(clip.mono())) ** 2
    freqs = np.fft.rfftfreq(clip.n_frames, d=1.0 / clip.sample_rate)
    return float((freqs * power).sum() / power.sum())


def test_determinism():
    a = synthesize_call(0, 2.0, 22050, seed=42)
    b = synthesize_call(0, 2.0, 22050, seed=42)
    np.testing.assert_array_equal(a.samples, b.samples)


def test_different_seeds_differ():
    a = synthesize_call(0, 2.0, 22050, seed=1)
    b = synthesize_call(0, 2.0, 22050, seed=2)
    assert not np.array_equal(a.samples, b.samples)


def test_duration_sample_count():
    clip = synthesize_call(3, 2.0, 22050, seed=0)
    assert clip.n_frames == 44100
    assert clip.channels == 1


def test_species_bands_are_disjoint():
    bands = [sp.band_hz for sp in SPECIES]
    for (lo1, hi1), (lo2, hi2) in zip(bands, bands[1:]):
        assert hi1 < lo2


def test_adjacent_species_centroids_differ():
    for k in range(len(SPECIES) - 1):
        c1 = spectral_centroid(synthesize_call(k, 2.0, 22050, seed=5))
        c2 = spectral_centroid(synthesize_call(k + 1, 2.0, 22050, seed=5))
        assert abs(c2 - c1) >= 500.0, (k, c1, c2)


def test_centroid_lands_in_species_band():
    for k in (0, 4, 9):
        clip = synthesize_call(k, 2.0, 22050, seed=11)
        lo, hi = SPECIES[k].band_hz
        assert lo <= spectral_centroid(clip) <= hi


def test_unknown_species_rejected():
    with pytest.raises(UnknownSpeciesError):
        synthesize_call(len(SPECIES), 2.0, 22050, seed=0)
    with pytest.raises(UnknownSpeciesError):
        synthesize_call(-1, 2.0, 22050, seed=0)


def test_events_cover_calls():
    clip, events = synthesize_call_events(2, 2.0, 22050, seed=7)
    assert events
    for e in events:
        assert 0 <= e.start_s < e.end_s <= clip.duration_s
        assert (e.fmin_hz, e.fmax_hz) == SPECIES[2].band_hz
    span = clip_annotation(events)
    assert span.start_s == min(e.start_s for e in events)
    assert span.end_s == max(e.end_s for e in events)


def test_corpus_build_and_manifest(tmp_path):
    manifest = build_corpus(tmp_path, species_count=3, clips_per_species=2, seed=99)
    assert len(manifest["clips"]) == 6
    wavs = sorted(p.name for p in tmp_path.glob("*.wav"))
    assert len(wavs) == 6
    reloaded = load_manifest(tmp_path)
    assert reloaded == json.loads(json.dumps(manifest))
    for entry in manifest["clips"]:
        assert entry["species_id"] == SPECIES[entry["species_index"]].species_id


def test_corpus_same_seed_identical(tmp_path):
    m1 = build_corpus(tmp_path / "a", 2, 2, seed=5)
    m2 = build_corpus(tmp_path / "b", 2, 2, seed=5)
    assert m1 == m2
    for entry in m1["clips"]:
        b1 = (tmp_path / "a" / entry["file"]).read_bytes()
        b2 = (tmp_path / "b" / entry["file"]).read_bytes()
        assert b1 == b2


def test_corpus_validation(tmp_path):
    with pytest.raises(InvalidParameterError):
        build_corpus(tmp_path, species_count=0, clips_per_species=1, seed=1)
    with pytest.raises(InvalidParameterError):
        build_corpus(tmp_path, species_count=len(SPECIES) + 1, clips_per_species=1, seed=1)
    with pytest.raises(InvalidParameterError):
        load_manifest(tmp_path / "missing")
