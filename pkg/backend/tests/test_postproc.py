# backend/tests/test_postproc.py
import os
import sys

# Add project root to sys.path
TESTS_DIR = os.path.dirname(__file__)
PROJECT_ROOT = os.path.abspath(os.path.join(TESTS_DIR, "..", ".."))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

import logging

import librosa
import numpy as np
import pytest
from pydantic import ValidationError

from backend.features import MelSpectrogram, build_mel_filterbank, load_mel, mel_spectrogram, stft
from backend.features.spectral import LOG_FLOOR
from backend.postproc import (
    VOCODER_HOP,
    SmoothingConfig,
    export_conditioning,
    griffin_lim,
    mel_to_magnitude,
    postprocess_mel,
    resample_hop,
    resample_matrix,
    savgol_smooth,
    smoothing_kernel,
)
from backend.postproc.mel_post import resampled_length
from backend.src.core.errors import SignalError
from conftest import make_sine, make_vowel


# ---------- Hop resampling ----------

def test_resampled_length():
    assert resampled_length(100, 270, 256) == 106
    assert resampled_length(256, 270, 256) == 270


def test_resample_keeps_constants():
    values = np.full((20, 3), 2.5)
    out = resample_matrix(values)
    assert out.shape == (22, 3)
    assert np.allclose(out, 2.5)


def test_resample_keeps_linear_trend():
    values = np.arange(40, dtype=np.float64)[:, None]
    out = resample_matrix(values)
    positions = np.arange(out.shape[0]) * 256 / 270
    interior = (positions >= 1) & (positions <= 37)
    assert np.allclose(out[interior, 0], positions[interior], atol=1e-9)


def test_resample_hits_source_frames_on_common_grid():
    values = np.random.default_rng(0).standard_normal((30, 4))
    # identity when hops agree
    assert np.allclose(resample_matrix(values, 270, 270), values)


def test_resample_needs_four_frames():
    with pytest.raises(SignalError) as exc:
        resample_matrix(np.zeros((3, 80)))
    assert exc.value.code == "too-short"


def test_resample_hop_updates_mel_metadata():
    mel = MelSpectrogram(np.zeros((10, 80)), hop=270)
    out = resample_hop(mel)
    assert out.hop == VOCODER_HOP
    assert out.frame_count == resampled_length(10, 270, VOCODER_HOP)


# ---------- Smoothing ----------

def test_smoothing_kernel_coefficients():
    expected = np.array([-3.0, 12.0, 17.0, 12.0, -3.0]) / 35.0
    assert np.allclose(smoothing_kernel(), expected)


def test_smoothing_config_validation():
    with pytest.raises(ValidationError):
        SmoothingConfig(window=4)
    with pytest.raises(ValidationError):
        SmoothingConfig(window=5, polyorder=5)


def test_savgol_keeps_cubics_and_damps_noise():
    t = np.linspace(-1, 1, 30)
    cubic = 0.5 * t**3 - t + 2.0
    values = np.tile(cubic[:, None], (1, 80))
    smoothed = savgol_smooth(MelSpectrogram(values, hop=256)).values
    assert np.allclose(smoothed[2:-2], values[2:-2], atol=1e-9)

    noise = np.random.default_rng(0).standard_normal((200, 80))
    rough = MelSpectrogram(noise, hop=256)
    assert savgol_smooth(rough).values[5:-5].std() < noise[5:-5].std()


def test_savgol_needs_a_full_window():
    with pytest.raises(SignalError) as exc:
        savgol_smooth(MelSpectrogram(np.zeros((4, 80)), hop=256))
    assert exc.value.code == "too-short"


def test_postprocess_and_export(tmp_path):
    mel = mel_spectrogram(make_vowel(seconds=0.5))
    with pytest.raises(SignalError) as exc:
        export_conditioning(mel, tmp_path / "bad.mel")
    assert exc.value.code == "wrong-hop"

    processed = postprocess_mel(mel)
    assert processed.hop == 256
    assert processed.frame_count == resampled_length(mel.frame_count, 270, 256)
    assert processed.values.min() >= np.log(LOG_FLOOR)

    back = load_mel(export_conditioning(processed, tmp_path / "cond.mel"))
    assert back.hop == 256
    assert back.values.shape == processed.values.shape

    again = export_conditioning(postprocess_mel(mel), tmp_path / "cond2.mel")
    assert again.read_bytes() == (tmp_path / "cond.mel").read_bytes()


# ---------- Griffin-Lim ----------

def test_mel_to_magnitude_matches_mel_energies():
    mel = mel_spectrogram(make_vowel(seconds=0.3))
    magnitude = mel_to_magnitude(mel)
    assert magnitude.shape == (513, mel.frame_count)
    assert np.all(magnitude >= 0)
    projected = build_mel_filterbank().weights @ magnitude
    energy = np.exp(mel.values.T)
    assert np.linalg.norm(projected - energy) < 0.02 * np.linalg.norm(energy)


def test_griffin_lim_residual_never_increases(caplog):
    mel = mel_spectrogram(make_vowel(seconds=0.5))
    result = griffin_lim(mel, iterations=12, seed=1)
    assert len(result.residuals) == 12
    assert np.all(np.diff(result.residuals) <= 1e-9)
    assert result.residuals[-1] < result.residuals[0]
    assert len(result.waveform) == mel.frame_count * 270
    assert "stalled" not in caplog.text


def test_griffin_lim_is_seeded():
    mel = mel_spectrogram(make_vowel(seconds=0.2))
    a = griffin_lim(mel, iterations=3, seed=4).waveform.samples
    b = griffin_lim(mel, iterations=3, seed=4).waveform.samples
    c = griffin_lim(mel, iterations=3, seed=5).waveform.samples
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_griffin_lim_of_silence_is_silent():
    mel = MelSpectrogram(np.full((6, 80), np.log(LOG_FLOOR)), hop=270)
    result = griffin_lim(mel, iterations=2)
    assert len(result.waveform) == 6 * 270
    assert not result.waveform.samples.any()


def test_griffin_lim_argument_checks():
    mel = MelSpectrogram(np.zeros((4, 80)), hop=270)
    with pytest.raises(SignalError) as exc:
        griffin_lim(mel, iterations=0)
    assert exc.value.code == "invalid-input"
    with pytest.raises(SignalError) as exc:
        griffin_lim(MelSpectrogram(np.zeros((0, 80)), hop=270))
    assert exc.value.code == "empty-signal"


def test_griffin_lim_recovers_sine_frequency():
    mel = mel_spectrogram(make_sine(1000.0, seconds=0.5))
    result = griffin_lim(mel, iterations=30, seed=0)
    spectrum = np.abs(stft(result.waveform))[2:-2].mean(axis=0)
    # 1000 Hz * 1024 / 22050 = 46.4
    assert abs(int(np.argmax(spectrum)) - 46) <= 2


def test_griffin_lim_warns_when_stalled(monkeypatch, caplog):
    monkeypatch.setattr(librosa, "istft", lambda matrix, length=None, **kwargs: np.zeros(length))
    mel = mel_spectrogram(make_vowel(seconds=0.2))
    with caplog.at_level(logging.WARNING):
        result = griffin_lim(mel, iterations=4)
    assert result.residuals == pytest.approx([1.0] * 4)
    assert "Griffin-Lim stalled" in caplog.text
