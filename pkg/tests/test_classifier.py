import numpy as np
import pytest

from birdscape.audio import Annotation, AudioClip, apply_gain
from birdscape.classifier import (
    ClassifierConfig,
    DEFAULT_CLASSIFIER,
    build_template,
    classify_clip,
    classify_frames,
    detect_events,
    evaluate,
    load_templates,
    save_templates,
)
from birdscape.dsp import mel_center_frequencies, mel_spectrogram
from birdscape.errors import InvalidParameterError
from birdscape.recognition import build_default_templates
from birdscape.synth import SPECIES, clip_annotation, synthesize_call, synthesize_call_events


@pytest.fixture(scope="module")
def templates():
    return build_default_templates(species_count=4, clips_per_species=3, seed=77)


def one_second_patch_clip(species=0, seed=123):
    """A clip whose [0.3, 1.3) s annotation spans exactly template_frames."""
    clip = synthesize_call(species, 2.0, DEFAULT_CLASSIFIER.sample_rate, seed=seed)
    return clip, Annotation(0.3, 1.3)


def silence_mel(duration=2.0):
    clip = AudioClip(np.zeros(int(duration * DEFAULT_CLASSIFIER.sample_rate)), DEFAULT_CLASSIFIER.sample_rate)
    return mel_spectrogram(clip, DEFAULT_CLASSIFIER.spectral)


def test_build_template_single_clip_is_standardized_patch():
    clip, ann = one_second_patch_clip()
    t = build_template("synth-00", [(clip, ann)])
    assert t.values.shape == (DEFAULT_CLASSIFIER.template_frames, DEFAULT_CLASSIFIER.spectral.mel_bins)
    assert abs(t.values.mean()) < 1e-9
    assert abs(t.values.std() - 1.0) < 1e-9
    assert t.training_clip_count == 1


def test_build_template_mean_idempotent_on_duplicates():
    clip, ann = one_second_patch_clip()
    t1 = build_template("synth-00", [(clip, ann)])
    t2 = build_template("synth-00", [(clip, ann), (clip, ann)])
    np.testing.assert_allclose(t1.values, t2.values)


def test_build_template_empty_rejected():
    with pytest.raises(InvalidParameterError):
        build_template("synth-00", [])


def test_build_template_annotation_outside_clip_rejected():
    clip = synthesize_call(0, 1.0, 22050, seed=1)
    with pytest.raises(InvalidParameterError):
        build_template("synth-00", [(clip, Annotation(0.5, 1.5))])


def test_template_peak_lands_in_species_band():
    sp = SPECIES[0]
    examples = []
    for i in range(5):
        clip, events = synthesize_call_events(0, 2.0, 22050, seed=1000 + i)
        examples.append((clip, clip_annotation(events)))
    t = build_template(sp.species_id, examples)
    peak_bin = int(np.unravel_index(t.values.argmax(), t.values.shape)[1])
    centers = mel_center_frequencies(DEFAULT_CLASSIFIER.spectral)
    assert sp.band_hz[0] <= centers[peak_bin] <= sp.band_hz[1]


def test_self_patch_scores_near_one(templates):
    clip, ann = one_second_patch_clip(species=1, seed=55)
    sr = DEFAULT_CLASSIFIER.sample_rate
    a, b = int(ann.start_s * sr), int(ann.end_s * sr)
    segment = AudioClip(clip.samples[a:b], sr)
    own = build_template("synth-01", [(clip, ann)])
    others = [t for t in templates if t.species_id != "synth-01"]
    result = classify_clip(mel_spectrogram(segment, DEFAULT_CLASSIFIER.spectral), [own] + others)
    assert result.top1[0] == "synth-01"
    assert result.top1[1] >= 0.99


def test_silence_scores_exactly_half(templates):
    result = classify_clip(silence_mel(), templates)
    for _, score in result.ranking:
        assert score == 0.5


def test_empty_template_list_rejected():
    with pytest.raises(InvalidParameterError):
        classify_clip(silence_mel(), [])


def test_ranking_sorted_and_tie_broken_by_id(templates):
    result = classify_clip(silence_mel(), templates)
    scores = [s for _, s in result.ranking]
    assert scores == sorted(scores, reverse=True)
    ids = [sid for sid, _ in result.ranking]
    assert ids == sorted(ids)  # all tied at 0.5


def test_score_invariant_to_gain(templates):
    clip = synthesize_call(2, 2.0, 22050, seed=31)
    quiet = apply_gain(clip, -6.0)
    r1 = classify_clip(mel_spectrogram(clip, DEFAULT_CLASSIFIER.spectral), templates)
    r2 = classify_clip(mel_spectrogram(quiet, DEFAULT_CLASSIFIER.spectral), templates)
    for (s1, v1), (s2, v2) in zip(r1.ranking, r2.ranking):
        assert s1 == s2
        assert abs(v1 - v2) < 1e-9


def test_frame_max_equals_clip_score_on_random_clips(templates):
    rng = np.random.default_rng(99)
    for _ in range(20):
        x = np.clip(rng.standard_normal(int(1.7 * 22050)) * 0.2, -1, 1)
        mel = mel_spectrogram(AudioClip(x, 22050), DEFAULT_CLASSIFIER.spectral)
        rc = classify_clip(mel, templates)
        rf = classify_frames(mel, templates)
        for sid, score in rc.ranking:
            col = rf.species_order.index(sid)
            assert rf.frame_scores[:, col].max() == score
        assert rc.ranking == rf.ranking


def test_single_window_input_has_one_row(templates):
    sr = DEFAULT_CLASSIFIER.sample_rate
    clip = synthesize_call(0, 1.0, sr, seed=5)
    n = int(DEFAULT_CLASSIFIER.template_duration_s * sr)
    mel = mel_spectrogram(AudioClip(clip.samples[:n], sr), DEFAULT_CLASSIFIER.spectral)
    assert mel.n_frames == DEFAULT_CLASSIFIER.template_frames
    rf = classify_frames(mel, templates)
    assert rf.frame_scores.shape[0] == 1
    for sid, score in rf.ranking:
        assert rf.frame_scores[0, rf.species_order.index(sid)] == score


def test_call_in_second_half_peaks_late(templates):
    sr = DEFAULT_CLASSIFIER.sample_rate
    call = synthesize_call(0, 1.0, sr, seed=17)
    x = np.concatenate([np.zeros(sr), call.samples[:, 0]])
    rf = classify_frames(mel_spectrogram(AudioClip(x, sr), DEFAULT_CLASSIFIER.spectral), templates)
    col = rf.species_order.index("synth-00")
    peak = int(rf.frame_scores[:, col].argmax())
    assert peak > rf.frame_scores.shape[0] // 2


def test_all_silence_frames_constant(templates):
    rf = classify_frames(silence_mel(), templates)
    for col in range(rf.frame_scores.shape[1]):
        assert np.ptp(rf.frame_scores[:, col]) == 0.0


def test_detect_events_threshold_validated(templates):
    rf = classify_frames(silence_mel(), templates)
    with pytest.raises(InvalidParameterError):
        detect_events(rf, threshold=1.01, min_duration_s=0.1)
    with pytest.raises(InvalidParameterError):
        detect_events(rf, threshold=-0.1, min_duration_s=0.1)


def test_detect_events_empty_below_threshold(templates):
    rf = classify_frames(silence_mel(), templates)
    assert detect_events(rf, threshold=0.8, min_duration_s=0.05) == []


def test_detect_events_finds_injected_call(templates):
    sr = DEFAULT_CLASSIFIER.sample_rate
    call = synthesize_call(0, 1.0, sr, seed=23)
    x = np.zeros(3 * sr)
    x[sr : 2 * sr] = call.samples[:, 0]
    rf = classify_frames(mel_spectrogram(AudioClip(x, sr), DEFAULT_CLASSIFIER.spectral), templates)
    events = detect_events(rf, threshold=0.8, min_duration_s=0.2, species_id="synth-00")
    assert len(events) == 1
    ev = events[0]
    overlap = min(ev.end_s, 2.0) - max(ev.start_s, 1.0)
    assert overlap >= 0.5


def test_detect_events_disjoint_and_long_enough(templates):
    rng = np.random.default_rng(4)
    x = np.clip(rng.standard_normal(3 * 22050) * 0.15, -1, 1)
    rf = classify_frames(mel_spectrogram(AudioClip(x, 22050), DEFAULT_CLASSIFIER.spectral), templates)
    events = detect_events(rf, threshold=0.45, min_duration_s=0.3)
    for e in events:
        assert e.end_s - e.start_s >= 0.3
    for a, b in zip(events, events[1:]):
        assert a.end_s <= b.start_s


def fake_result(scores_by_species):
    from birdscape.classifier import ClassificationResult, _rank

    return ClassificationResult(ranking=_rank(scores_by_species), mode="clip")


def test_evaluate_perfect_ranking():
    preds = [fake_result({"a": 1.0, "b": 0.0}), fake_result({"a": 0.0, "b": 1.0})]
    report = evaluate(preds, ["a", "b"])
    assert report.mean_ap == 1.0
    assert report.top1_accuracy == 1.0


def test_evaluate_hand_enumerated_ap():
    # One species, three clips; positives ranked 1st and 3rd: AP = (1 + 2/3)/2.
    preds = [
        fake_result({"a": 0.9}),
        fake_result({"a": 0.8}),
        fake_result({"a": 0.7}),
    ]
    truth = ["a", "other", "a"]
    report = evaluate(preds, truth)
    assert report.per_species_ap["a"] == pytest.approx(5 / 6, abs=1e-12)


def test_evaluate_length_mismatch():
    with pytest.raises(InvalidParameterError):
        evaluate([fake_result({"a": 1.0})], ["a", "b"])


def test_evaluate_excluded_species_reported():
    preds = [fake_result({"a": 0.9, "ghost": 0.1})]
    report = evaluate(preds, ["a"])
    assert report.excluded_species == ("ghost",)
    assert "ghost" not in report.per_species_ap


def test_evaluate_permutation_invariant():
    rng = np.random.default_rng(12)
    preds = [fake_result({"a": rng.random(), "b": rng.random()}) for _ in range(12)]
    truth = ["a", "b"] * 6
    base = evaluate(preds, truth)
    perm = rng.permutation(12)
    shuffled = evaluate([preds[i] for i in perm], [truth[i] for i in perm])
    assert base.mean_ap == pytest.approx(shuffled.mean_ap, abs=1e-12)
    assert base.per_species_ap == pytest.approx(shuffled.per_species_ap)


def test_evaluate_random_scores_near_positive_rate():
    rng = np.random.default_rng(8)
    maps = []
    for _ in range(200):
        preds = [fake_result({"a": rng.random()}) for _ in range(20)]
        truth = ["a" if i < 10 else "other" for i in range(20)]
        maps.append(evaluate(preds, truth).mean_ap)
    assert abs(float(np.mean(maps)) - 0.5) <= 0.1


def test_template_save_load_round_trip(tmp_path, templates):
    path = tmp_path / "templates.json"
    save_templates(path, templates, DEFAULT_CLASSIFIER)
    loaded, config = load_templates(path)
    assert config == DEFAULT_CLASSIFIER
    assert [t.species_id for t in loaded] == [t.species_id for t in templates]
    for a, b in zip(loaded, templates):
        np.testing.assert_allclose(a.values, b.values, atol=1e-6)
        assert a.band_hz == b.band_hz

    # Float32 round trip must not change rankings.
    clip = synthesize_call(1, 2.0, 22050, seed=3)
    mel = mel_spectrogram(clip, DEFAULT_CLASSIFIER.spectral)
    assert classify_clip(mel, loaded).top1[0] == classify_clip(mel, templates).top1[0]
