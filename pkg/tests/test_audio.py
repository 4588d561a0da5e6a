import io
import wave

import numpy as np
import pytest

from contourflow import audio


def test_clip_validation():
    with pytest.raises(audio.AudioError):
        audio.AudioClip(np.array([[0.1, 0.2]]), 44100)
    with pytest.raises(audio.AudioError):
        audio.AudioClip(np.array([0.0, np.nan]), 44100)
    with pytest.raises(audio.AudioError):
        audio.AudioClip(np.array([0.0]), 0)
    clip = audio.AudioClip(np.array([0.5, -0.5]), 44100)
    assert len(clip) == 2
    assert clip.nyquist == 22050.0


def test_synthesized_clip_clamps_and_counts():
    clip = audio.synthesized_clip(np.array([0.5, 1.7, -2.0, 0.0]), 44100)
    assert clip.n_clipped == 2
    assert clip.samples.max() == 1.0
    assert clip.samples.min() == -1.0


def test_rms_db():
    clip = audio.AudioClip(np.full(100, 0.1), 44100)
    assert abs(clip.rms_db() - (-20.0)) < 1e-9
    silent = audio.AudioClip(np.zeros(100), 44100)
    assert silent.rms_db() < -100


def test_wav_roundtrip_pcm16(tmp_path):
    rng = np.random.default_rng(2)
    clip = audio.synthesized_clip(0.4 * rng.standard_normal(2000), 44100)
    path = tmp_path / "x.wav"
    audio.write_wav(path, clip)
    back = audio.read_wav(path)
    assert back.sample_rate == 44100
    assert np.abs(back.samples - clip.samples).max() < 1.0 / 32768 + 1e-9


def test_wav_roundtrip_float32(tmp_path):
    rng = np.random.default_rng(4)
    clip = audio.synthesized_clip(0.4 * rng.standard_normal(2000), 22050)
    path = tmp_path / "x.wav"
    audio.write_wav(path, clip, subtype="float32")
    back = audio.read_wav(path)
    assert back.sample_rate == 22050
    assert np.abs(back.samples - clip.samples).max() < 1e-6


def test_wav_bytes_roundtrip():
    clip = audio.synthesized_clip(np.linspace(-0.5, 0.5, 512), 44100)
    back = audio.read_wav_bytes(audio.wav_bytes(clip))
    assert np.abs(back.samples - clip.samples).max() < 1.0 / 32768 + 1e-9


def test_stereo_downmix(tmp_path):
    # interleave two channels with known means using the stdlib writer
    left = (np.full(100, 8000)).astype("<i2")
    right = (np.full(100, -4000)).astype("<i2")
    inter = np.empty(200, dtype="<i2")
    inter[0::2] = left
    inter[1::2] = right
    path = tmp_path / "st.wav"
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(2)
        fh.setsampwidth(2)
        fh.setframerate(44100)
        fh.writeframes(inter.tobytes())
    clip = audio.read_wav(path)
    assert len(clip) == 100
    assert np.allclose(clip.samples, (8000 - 4000) / 2 / 32768.0)


def test_read_rejects_garbage(tmp_path):
    path = tmp_path / "bad.wav"
    path.write_bytes(b"not a wav at all")
    with pytest.raises(audio.AudioError):
        audio.read_wav(path)
    with pytest.raises(audio.AudioError):
        audio.read_wav_bytes(b"RIFFgarbage")
