import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birdscape.audio import Annotation, AudioClip, apply_gain, downmix, resample, to_stereo
from birdscape.errors import InvalidParameterError, MalformedAudioError
from birdscape.wavio import load_wav, save_wav, wav_bytes


def tone(freq=440.0, duration=0.5, rate=22050, amp=0.5, channels=1):
    t = np.arange(int(duration * rate)) / rate
    x = amp * np.sin(2 * np.pi * freq * t)
    if channels == 2:
        x = np.stack([x, x], axis=1)
    return AudioClip(x, rate)


def test_clip_validation():
    with pytest.raises(InvalidParameterError):
        AudioClip(np.ones(100) * 1.5, 22050)
    with pytest.raises(InvalidParameterError):
        AudioClip(np.full(10, np.nan), 22050)
    with pytest.raises(InvalidParameterError):
        AudioClip(np.zeros(10), 0)
    with pytest.raises(InvalidParameterError):
        AudioClip(np.zeros((10, 3)), 22050)


def test_clip_is_immutable():
    clip = tone()
    with pytest.raises(ValueError):
        clip.samples[0, 0] = 0.9


def test_gain_identity_at_zero():
    clip = tone()
    out = apply_gain(clip, 0.0)
    np.testing.assert_array_equal(out.samples, clip.samples)


def test_gain_20db_scales_tenfold():
    clip = AudioClip(np.full(100, 0.05), 22050)
    out = apply_gain(clip, 20.0)
    np.testing.assert_allclose(out.samples, 0.5)


def test_gain_clamps():
    clip = AudioClip(np.full(100, 0.2), 22050)
    out = apply_gain(clip, 20.0)
    np.testing.assert_allclose(out.samples, 1.0)


def test_gain_rejects_non_finite():
    with pytest.raises(InvalidParameterError):
        apply_gain(tone(), float("nan"))
    with pytest.raises(InvalidParameterError):
        apply_gain(tone(), float("inf"))


@settings(max_examples=60)
@given(gain=st.floats(min_value=-18.0, max_value=18.0, allow_nan=False))
def test_gain_round_trip_without_clamp(gain):
    # Peak 0.1 cannot clamp within +-18 dB (0.1 * 10^0.9 < 0.8).
    clip = tone(amp=0.1)
    back = apply_gain(apply_gain(clip, gain), -gain)
    np.testing.assert_allclose(back.samples, clip.samples, atol=1e-12)


def test_downmix_mean_of_identical_channels():
    stereo = tone(channels=2)
    mono = downmix(stereo)
    assert mono.channels == 1
    np.testing.assert_array_equal(mono.samples[:, 0], stereo.samples[:, 0])


def test_downmix_is_channel_mean():
    left = np.full(50, 0.2)
    right = np.full(50, 0.6)
    clip = AudioClip(np.stack([left, right], axis=1), 22050)
    np.testing.assert_allclose(downmix(clip).samples[:, 0], 0.4)


def test_to_stereo_duplicates():
    clip = tone()
    stereo = to_stereo(clip)
    assert stereo.channels == 2
    np.testing.assert_array_equal(stereo.samples[:, 0], stereo.samples[:, 1])


def test_resample_halves_length():
    clip = tone(duration=1.0, rate=44100)
    out = resample(clip, 22050)
    assert out.sample_rate == 22050
    assert abs(out.n_frames - 22050) <= 1


def test_resample_identity():
    clip = tone()
    assert resample(clip, clip.sample_rate) is clip


def test_annotation_validation():
    with pytest.raises(InvalidParameterError):
        Annotation(1.0, 0.5)
    with pytest.raises(InvalidParameterError):
        Annotation(-0.1, 0.5)
    with pytest.raises(InvalidParameterError):
        Annotation(0.0, 1.0, fmin_hz=500.0)
    with pytest.raises(InvalidParameterError):
        Annotation(0.0, 1.0, fmin_hz=900.0, fmax_hz=500.0)
    ann = Annotation(0.0, 1.0, fmin_hz=500.0, fmax_hz=900.0)
    with pytest.raises(InvalidParameterError):
        ann.validate_within(tone(duration=0.5))


@pytest.mark.parametrize("fmt", ["pcm16", "float32"])
@pytest.mark.parametrize("channels", [1, 2])
def test_wav_round_trip(tmp_path, fmt, channels):
    clip = tone(channels=channels)
    path = tmp_path / "clip.wav"
    save_wav(path, clip, sample_format=fmt)
    back = load_wav(path)
    assert back.sample_rate == clip.sample_rate
    assert back.channels == channels
    tol = 1e-4 if fmt == "pcm16" else 1e-7
    np.testing.assert_allclose(back.samples, clip.samples, atol=tol)


def test_wav_bytes_round_trip():
    clip = tone()
    back = load_wav(wav_bytes(clip))
    np.testing.assert_allclose(back.samples, clip.samples, atol=1e-7)


def test_load_wav_rejects_garbage():
    with pytest.raises(MalformedAudioError):
        load_wav(b"definitely not RIFF data")
    with pytest.raises(MalformedAudioError):
        load_wav(b"RIFF\x00\x00\x00\x00WAVE")
