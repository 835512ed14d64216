"""Acceptance suite: one test per release criterion, tolerances pinned."""

import json
import math
import socket
import subprocess
import sys
import time
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import pytest

from birdscape.audio import Annotation, AudioClip
from birdscape.classifier import DEFAULT_CLASSIFIER, classify_clip, classify_frames, evaluate
from birdscape.cli import main
from birdscape.dsp import mel_spectrogram
from birdscape.errors import QuestError
from birdscape.gamification import DEFAULT_GAME_CONFIG, GameConfig, GameEngine, Quest, replay
from birdscape.geo import GeoPoint, point_at, tile_for
from birdscape.recognition import build_default_templates
from birdscape.repository import Detection, DetectionRepository, GLOBE
from birdscape.soundscape import (
    MIX_BLOCK_S,
    MixParams,
    SoundscapeScene,
    ara_mix,
    pan_gains,
    render_scene,
)
from birdscape.synth import synthesize_call
from birdscape.timeutil import now_utc

T0 = datetime(2025, 6, 1, tzinfo=timezone.utc)


# ---------------------------------------------------------------------------
# Classifier: synth-corpus(8 species, 20 clips), top-1 >= 0.95 clean and
# >= 0.80 at 10 dB SNR, total runtime < 60 s.
# ---------------------------------------------------------------------------


def test_classifier_accuracy_clean_and_noisy(tmp_path, capsys):
    start = time.monotonic()
    corpus = tmp_path / "corpus"
    assert main(["synth-corpus", str(corpus), "--species", "8", "--clips", "20", "--seed", "424242"]) == 0
    capsys.readouterr()

    assert main(["eval", str(corpus), "--split-seed", "9"]) == 0
    clean = json.loads(capsys.readouterr().out)
    assert clean["n_validation"] == 32

    assert main(["eval", str(corpus), "--split-seed", "9", "--noise-snr-db", "10"]) == 0
    noisy = json.loads(capsys.readouterr().out)

    elapsed = time.monotonic() - start
    assert clean["report"]["top1_accuracy"] >= 0.95, clean["report"]
    assert noisy["report"]["top1_accuracy"] >= 0.80, noisy["report"]
    assert elapsed < 60.0, f"took {elapsed:.1f} s"


# ---------------------------------------------------------------------------
# mAP metric: hand-enumerated AP = 5/6 exactly; perfect ranking mAP = 1.0.
# ---------------------------------------------------------------------------


def _result(scores):
    from birdscape.classifier import ClassificationResult, _rank

    return ClassificationResult(ranking=_rank(scores), mode="clip")


def test_map_metric_hand_case():
    preds = [_result({"a": 0.9}), _result({"a": 0.8}), _result({"a": 0.7})]
    report = evaluate(preds, ["a", "other", "a"])
    assert report.per_species_ap["a"] == (1.0 + 2.0 / 3.0) / 2.0  # exact float equality

    perfect = [
        _result({"a": 1.0, "b": 0.0}),
        _result({"a": 0.0, "b": 1.0}),
        _result({"a": 1.0, "b": 0.0}),
    ]
    report = evaluate(perfect, ["a", "b", "a"])
    assert report.mean_ap == 1.0


# ---------------------------------------------------------------------------
# Frame/clip consistency: exact equality over 100 random clips.
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def acceptance_templates():
    return build_default_templates(species_count=4, clips_per_species=3, seed=2024)


def test_frame_clip_consistency(acceptance_templates):
    rng = np.random.default_rng(123)
    sr = DEFAULT_CLASSIFIER.sample_rate
    for i in range(100):
        n = int(sr * float(rng.uniform(1.0, 2.5)))
        kind = i % 3
        if kind == 0:
            x = np.clip(rng.standard_normal(n) * 0.2, -1, 1)
        elif kind == 1:
            x = synthesize_call(int(rng.integers(0, 4)), n / sr, sr, seed=i).mono()[:n]
        else:
            t = np.arange(n) / sr
            x = 0.3 * np.sin(2 * np.pi * float(rng.uniform(600, 7000)) * t)
        mel = mel_spectrogram(AudioClip(x, sr), DEFAULT_CLASSIFIER.spectral)
        rc = classify_clip(mel, acceptance_templates)
        rf = classify_frames(mel, acceptance_templates)
        for sid, score in rc.ranking:
            col = rf.species_order.index(sid)
            assert float(rf.frame_scores[:, col].max()) == score


# ---------------------------------------------------------------------------
# Geo oracle: 1e4 random detections; queries equal linear scan; tile counts
# conserve parent = sum of 4 children at every zoom 0..14.
# ---------------------------------------------------------------------------


def test_geo_query_oracle_and_tile_conservation(tmp_path):
    repo = DetectionRepository(tmp_path / "data")
    base_clip = AudioClip(np.zeros(2048) + 0.01, 22050)
    ref = repo.clips.add(base_clip)
    rng = np.random.default_rng(77)
    dets = []
    for i in range(10_000):
        det = Detection.create(
            species_id=f"synth-{int(rng.integers(0, 6)):02d}",
            confidence=float(rng.uniform(0.65, 1.0)),
            timestamp=T0 + timedelta(minutes=float(rng.uniform(0, 50_000))),
            geo=GeoPoint(float(rng.uniform(-89.9, 89.9)), float(rng.uniform(-180.0, 180.0))),
            annotation=Annotation(0.0, 0.05 + i * 1e-6),
            clip_ref=ref,
            submitter=f"u{i}",
        )
        repo.insert(det)
        dets.append(det)
    assert len(repo) == 10_000

    def oracle(sw, ne, t_lo, t_hi, species):
        lon_hi = 180.0 if ne.lon == -180.0 else ne.lon
        picked = [
            d
            for d in dets
            if sw.lat <= d.geo.lat <= ne.lat
            and sw.lon <= d.geo.lon <= lon_hi
            and (t_lo is None or d.timestamp >= t_lo)
            and (t_hi is None or d.timestamp <= t_hi)
            and (species is None or d.species_id == species)
        ]
        return sorted(picked, key=lambda d: (d.timestamp, d.id))

    qrng = np.random.default_rng(9)
    for q in range(40):
        lat1, lat2 = sorted(qrng.uniform(-90, 90, size=2).tolist())
        lon1, lon2 = sorted(qrng.uniform(-180, 179.999, size=2).tolist())
        sw, ne = GeoPoint(lat1, lon1), GeoPoint(lat2, lon2)
        if q % 4 == 0:
            t_lo = t_hi = None
        else:
            t_lo = T0 + timedelta(minutes=float(qrng.uniform(0, 25_000)))
            t_hi = t_lo + timedelta(minutes=float(qrng.uniform(0, 25_000)))
        species = f"synth-{int(qrng.integers(0, 6)):02d}" if q % 3 == 0 else None
        assert repo.query((sw, ne), (t_lo, t_hi), species) == oracle(sw, ne, t_lo, t_hi, species)

    # Tile pyramid: implementation counts match a direct recount, and each
    # parent equals the sum of its four children at every zoom 0..14.
    counts_by_zoom = {z: repo.tile_counts(z) for z in range(0, 15)}
    for z in range(0, 15):
        direct = {}
        for d in dets:
            key = tile_for(d.geo, z)
            direct[key] = direct.get(key, 0) + 1
        assert counts_by_zoom[z] == direct
    for z in range(0, 14):
        rollup = {}
        for key, count in counts_by_zoom[z + 1].items():
            rollup[key.parent()] = rollup.get(key.parent(), 0) + count
        assert rollup == counts_by_zoom[z]
    repo.close()


# ---------------------------------------------------------------------------
# Trajectory: equatorial two-cluster fixture, 111 km/bucket within 1%.
# ---------------------------------------------------------------------------


def test_trajectory_equatorial_mobility(tmp_path):
    repo = DetectionRepository(tmp_path / "data")
    clip_ref = repo.clips.add(AudioClip(np.zeros(2048) + 0.01, 22050))
    for i, (lon, day) in enumerate([(0.0, 0), (0.0, 1), (0.0, 2), (1.0, 7), (1.0, 8), (1.0, 9)]):
        repo.insert(
            Detection.create(
                "synth-00", 0.9, T0 + timedelta(days=day, hours=1), GeoPoint(0.0, lon),
                Annotation(0.0, 0.1 + i * 0.01), clip_ref, f"u{i}",
            )
        )
    traj = repo.trajectory("synth-00", (T0, None), bucket=timedelta(days=7))
    assert len(traj.entries) == 2
    assert abs(traj.mobility_km_per_bucket - 111.195) / 111.195 <= 0.01
    repo.close()


# ---------------------------------------------------------------------------
# Pan law: constant power to 1e-9 over 1e4 azimuths; -90 deg leaves the right
# channel at least 40 dB below the left in a rendered scene.
# ---------------------------------------------------------------------------


def test_pan_law(tmp_path):
    rng = np.random.default_rng(31)
    for az in rng.uniform(-1080.0, 1080.0, size=10_000):
        left, right, _ = pan_gains(float(az))
        assert abs(left * left + right * right - 1.0) <= 1e-9

    repo = DetectionRepository(tmp_path / "data")
    ref = repo.clips.add(synthesize_call(0, 1.0, 22050, seed=6))
    from birdscape.soundscape import VirtualSource

    scene = SoundscapeScene(
        GeoPoint(0, 0), 0.0, None, None,
        (VirtualSource("synth-00", -90.0, 10.0, 1.0, 1.0, 0.0, ref),),
        now_utc(),
    )
    out = render_scene(scene, repo.clips, 1.0)
    left_rms = float(np.sqrt(np.mean(out.samples[:, 0] ** 2)))
    right_rms = float(np.sqrt(np.mean(out.samples[:, 1] ** 2)))
    assert 20 * math.log10(max(right_rms, 1e-30) / left_rms) <= -40.0
    repo.close()


# ---------------------------------------------------------------------------
# ARA mix: silent real -> max gain; +20 dB step settles within 3 tau; output
# never leaves [-1, 1].
# ---------------------------------------------------------------------------


def _gain_trace(real, virtual, params):
    from birdscape.audio import to_stereo

    mixed = ara_mix(real, virtual, params)
    real_st, virt_st = to_stereo(real), to_stereo(virtual)
    block = int(round(MIX_BLOCK_S * real.sample_rate))
    gains = []
    for start in range(0, real_st.n_frames, block):
        stop = min(start + block, real_st.n_frames)
        delta = mixed.samples[start:stop] - real_st.samples[start:stop]
        v = virt_st.samples[start:stop]
        denom = float(np.sum(v * v))
        gains.append(float(np.sum(delta * v) / denom) if denom > 0 else np.nan)
    return np.array(gains)


def test_ara_mix_silent_step_bounded():
    rate = 22050
    params = MixParams(target_virtual_to_real_db=0.0, min_gain=0.01, max_gain=5.0, smoothing_s=0.3)

    t = np.arange(2 * rate) / rate
    virtual = AudioClip(0.05 * np.sin(2 * np.pi * 1900 * t), rate)
    silent_real = AudioClip(np.zeros(2 * rate), rate)
    trace = _gain_trace(silent_real, virtual, params)
    np.testing.assert_allclose(trace, params.max_gain, rtol=1e-6)

    t6 = np.arange(6 * rate) / rate
    amp = np.where(t6 < 3.0, 0.02, 0.2)
    real = AudioClip(np.clip(amp * np.sin(2 * np.pi * 700 * t6), -1, 1), rate)
    virtual6 = AudioClip(0.05 * np.sin(2 * np.pi * 1900 * t6), rate)
    trace = _gain_trace(real, virtual6, MixParams(0.0, 0.01, 50.0, 0.3))
    blocks_per_s = int(round(1.0 / MIX_BLOCK_S))
    settled = trace[int((3.0 + 3 * 0.3) * blocks_per_s) + 1]
    final = trace[-1]
    before = trace[int(2.5 * blocks_per_s)]
    assert final / before == pytest.approx(10.0, rel=0.1)
    assert abs(20 * math.log10(settled / final)) <= 1.0

    rng = np.random.default_rng(5)
    loud_real = AudioClip(np.clip(rng.standard_normal(rate) * 0.6, -1, 1), rate)
    loud_virtual = AudioClip(np.clip(rng.standard_normal(rate) * 0.9, -1, 1), rate)
    mixed = ara_mix(loud_real, loud_virtual, MixParams(max_gain=10.0))
    assert mixed.samples.min() >= -1.0 and mixed.samples.max() <= 1.0


# ---------------------------------------------------------------------------
# Gamification: replay reproduces state bit-exactly; a windowed combo quest
# completes inside the window and expires outside it.
# ---------------------------------------------------------------------------


class _Det:
    def __init__(self, det_id, species_id, timestamp):
        self.id = det_id
        self.species_id = species_id
        self.timestamp = timestamp


def test_gamification_replay_and_combo_quest(tmp_path):
    config = GameConfig(
        quests=(
            Quest("combo", "combo", {"synth-00": 1, "synth-01": 1}, 50, time_limit_s=3600.0),
            *DEFAULT_GAME_CONFIG.quests,
        ),
        badges=DEFAULT_GAME_CONFIG.badges,
        base_points=DEFAULT_GAME_CONFIG.base_points,
    )

    # Script A: both species inside the 1 h window -> completes.
    eng_a = GameEngine(tmp_path / "a", config)
    eng_a.accept_quest("u", "combo", at=T0)
    eng_a.record_submission("u", _Det("d1", "synth-00", T0 + timedelta(minutes=10)))
    out = eng_a.record_submission("u", _Det("d2", "synth-01", T0 + timedelta(minutes=50)))
    assert out.quests_completed == ("combo",)
    assert out.total_points == 2 * config.base_points + 50

    # Script B: second species after the window -> expires, no reward.
    eng_b = GameEngine(tmp_path / "b", config)
    eng_b.accept_quest("u", "combo", at=T0)
    eng_b.record_submission("u", _Det("d1", "synth-00", T0 + timedelta(minutes=10)))
    out = eng_b.record_submission("u", _Det("d2", "synth-01", T0 + timedelta(minutes=90)))
    assert out.quests_completed == ()
    assert out.quests_expired == ("combo",)
    assert out.total_points == 2 * config.base_points

    # Replaying each log from empty state reproduces the live state exactly.
    for engine in (eng_a, eng_b):
        events = engine.events("u")
        replayed = replay("u", events, config)
        live = engine._state("u")
        assert replayed == live
        again = replay("u", events, config)
        assert again == replayed
        view_time = T0 + timedelta(hours=3)
        assert replayed.to_view(config, view_time) == live.to_view(config, view_time)

    # Random scripts replay identically too.
    rng = np.random.default_rng(17)
    eng_c = GameEngine(tmp_path / "c", config)
    for i in range(60):
        t = T0 + timedelta(minutes=int(rng.integers(0, 5000)))
        if rng.random() < 0.3:
            quest = config.quests[int(rng.integers(0, len(config.quests)))]
            try:
                eng_c.accept_quest("u", quest.id, at=t)
            except QuestError:
                pass
        else:
            eng_c.record_submission("u", _Det(f"d{i}", f"synth-{int(rng.integers(0, 5)):02d}", t))
    events = eng_c.events("u")
    assert replay("u", events, config) == eng_c._state("u")


# ---------------------------------------------------------------------------
# End-to-end: spawn the server, submit a species-0 recording, fetch the scene
# from an adjacent position; one source, right species, azimuth +- 0.5 deg,
# all inside 10 s of wall time.
# ---------------------------------------------------------------------------


def test_end_to_end_submit_and_scene(tmp_path):
    import requests

    from birdscape.wavio import wav_bytes

    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    data_dir = tmp_path / "data"
    audio = wav_bytes(synthesize_call(0, 2.0, 22050, seed=11), sample_format="pcm16")
    user_pos = GeoPoint(45.0, 9.0)
    det_pos = point_at(user_pos, 90.0, 250.0)  # due east of the user

    start = time.monotonic()
    proc = subprocess.Popen(
        [sys.executable, "-m", "birdscape.cli", "serve",
         "--host", "127.0.0.1", "--port", str(port), "--data-dir", str(data_dir)],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    try:
        base = f"http://127.0.0.1:{port}"
        while True:
            if proc.poll() is not None:
                raise RuntimeError(f"server died: {proc.stderr.read()}")
            try:
                requests.get(f"{base}/health", timeout=0.5)
                break
            except requests.RequestException:
                if time.monotonic() - start > 9.0:
                    raise TimeoutError("server not ready inside the budget")
                time.sleep(0.05)
        meta = {
            "lat": det_pos.lat,
            "lon": det_pos.lon,
            "timestamp": "2025-06-01T07:00:00+00:00",
            "annotation": {"start_s": 0.05, "end_s": 1.9},
            "mode": "service",
        }
        r = requests.post(
            f"{base}/v1/recordings",
            headers={"Authorization": "Bearer fieldworker"},
            files={"audio": ("c.wav", audio, "audio/wav"), "meta": (None, json.dumps(meta))},
            timeout=10,
        )
        body = r.json()
        assert body["status"] == "accepted", body
        assert body["classification"]["ranking"][0][0] == "synth-00"

        scene = requests.get(
            f"{base}/v1/scene",
            params={"lat": user_pos.lat, "lon": user_pos.lon, "heading": 0.0},
            timeout=10,
        ).json()
        elapsed = time.monotonic() - start
        assert len(scene["sources"]) == 1
        src = scene["sources"][0]
        assert src["species_id"] == "synth-00"
        assert abs(src["azimuth_deg"] - 90.0) <= 0.5
        assert elapsed < 10.0, f"end-to-end took {elapsed:.1f} s"
    finally:
        proc.terminate()
        proc.wait(timeout=15)
