# backend/tests/test_features.py
import os
import sys

# Add project root to sys.path
TESTS_DIR = os.path.dirname(__file__)
PROJECT_ROOT = os.path.abspath(os.path.join(TESTS_DIR, "..", ".."))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

import logging

import numpy as np
import pytest
from scipy.signal import get_window

from backend.data_ingestion.audio import Waveform, aligned_frame_count
from backend.features import (
    MelSpectrogram,
    StftConfig,
    build_mel_filterbank,
    fit_normalizer,
    load_mel,
    load_normalizer,
    mel_spectrogram,
    save_mel,
    save_normalizer,
    stft,
)
from backend.features.spectral import LOG_FLOOR, MEL_POWER, hz_to_mel
from backend.src.core.errors import FormatError, SignalError
from conftest import make_sine, make_vowel


def test_stft_frame_count_and_shape():
    spec = stft(Waveform(np.zeros(2700)))
    assert spec.shape == (11, 513)
    assert np.iscomplexobj(spec)
    assert not np.abs(spec).any()


def test_stft_sine_peaks_at_expected_bin():
    spec = np.abs(stft(make_sine(1000.0, seconds=0.5)))
    # 1000 Hz * 1024 / 22050 = 46.4
    assert np.all(np.argmax(spec[2:-2], axis=1) == 46)


def test_stft_frames_satisfy_parseval():
    samples = np.random.default_rng(0).standard_normal(5400)
    spec = stft(Waveform(samples))
    padded = np.pad(samples, 512, mode="reflect")
    window = get_window("hann", 1024)
    for t in (3, 7, 12):
        frame = padded[t * 270 : t * 270 + 1024] * window
        power = spec[t]
        one_sided = abs(power[0]) ** 2 + 2 * np.sum(np.abs(power[1:-1]) ** 2) + abs(power[-1]) ** 2
        assert one_sided == pytest.approx(1024 * np.sum(frame**2), rel=1e-6)


def test_stft_rejects_empty_signal():
    with pytest.raises(SignalError) as exc:
        stft(Waveform(np.zeros(0)))
    assert exc.value.code == "empty-signal"


def test_filterbank_shape_and_unit_area():
    fb = build_mel_filterbank()
    assert fb.weights.shape == (80, 513)
    assert np.all(fb.weights >= 0)
    assert np.allclose(fb.weights.sum(axis=1) * 22050 / 1024, 1.0)
    assert np.all(np.diff(fb.center_frequencies) > 0)


def test_filterbank_rows_are_single_triangles():
    weights = build_mel_filterbank().weights
    for row in weights:
        support = np.flatnonzero(row > 0)
        assert support[-1] - support[0] + 1 == support.size
        peak = int(np.argmax(row))
        assert np.all(np.diff(row[support[0] : peak + 1]) >= 0)
        assert np.all(np.diff(row[peak : support[-1] + 1]) <= 0)
    # each filter only overlaps its neighbours
    assert not np.any(weights[:-2] * weights[2:])


def test_htk_mel_scale():
    assert hz_to_mel(700.0) == pytest.approx(781.17, abs=0.01)
    assert hz_to_mel(0.0) == pytest.approx(0.0)


@pytest.mark.parametrize("fmin, fmax", [(8000.0, 100.0), (-1.0, 8000.0), (0.0, 12000.0)])
def test_filterbank_invalid_range(fmin, fmax):
    with pytest.raises(SignalError) as exc:
        build_mel_filterbank(fmin=fmin, fmax=fmax)
    assert exc.value.code == "invalid-range"


def test_silence_sits_on_log_floor():
    mel = mel_spectrogram(Waveform(np.zeros(2700)))
    assert mel.values.shape == (11, 80)
    assert np.allclose(mel.values, np.log(LOG_FLOOR))
    assert mel.values[0, 0] == pytest.approx(-11.5129, abs=1e-4)


def test_sine_energy_lands_in_matching_filter():
    fb = build_mel_filterbank()
    mel = mel_spectrogram(make_sine(2000.0, seconds=0.5), fb=fb)
    nearest = int(np.argmin(np.abs(fb.center_frequencies - 2000.0)))
    peak = np.argmax(mel.values[5:-5], axis=1)
    assert np.all(np.abs(peak - nearest) <= 1)


def test_amplitude_doubling_shifts_log_mel():
    wav = make_vowel(seconds=0.5)
    low = mel_spectrogram(wav).values
    high = mel_spectrogram(Waveform(2 * wav.samples)).values
    above = low > np.log(LOG_FLOOR) + 1.0
    assert above.mean() > 0.5
    assert np.allclose(high[above] - low[above], MEL_POWER * np.log(2.0), atol=1e-6)


def test_time_shift_by_one_hop_shifts_frames():
    wav = make_vowel(seconds=0.5)
    hop = StftConfig().hop
    a = mel_spectrogram(wav).values
    b = mel_spectrogram(Waveform(np.concatenate([np.zeros(hop), wav.samples]))).values
    # interior frames only: reflect padding differs at the edges
    assert np.allclose(b[5:30], a[4:29], atol=1e-6)


def test_mel_frames_match_aligned_count():
    frames = 20
    samples = frames * 270 - 1
    mel = mel_spectrogram(Waveform(np.random.default_rng(1).standard_normal(samples)))
    assert mel.frame_count == aligned_frame_count(frames, samples) == frames


def test_mel_spectrogram_rejects_values_below_floor(caplog):
    with pytest.raises(SignalError):
        MelSpectrogram(np.full((3, 80), -20.0), hop=270)
    with caplog.at_level(logging.WARNING):
        clamped = MelSpectrogram.clamped(np.full((3, 80), -20.0), hop=270)
    assert "Clamped 240 mel cells" in caplog.text
    assert np.allclose(clamped.values, np.log(LOG_FLOOR))


# ---------- Normalization ----------

def test_normalizer_standardizes_columns():
    norm = fit_normalizer([np.array([[1.0, 5.0], [3.0, 5.0]])])
    out = norm.apply(np.array([[1.0, 5.0], [3.0, 5.0]]))
    assert np.allclose(out[:, 0], [-1.0, 1.0])
    assert np.allclose(out[:, 1], 0.0)
    assert norm.constant_dims == (1,)


def test_normalizer_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    data = [rng.normal(3.0, 2.0, (50, 4)), rng.normal(-1.0, 0.5, (30, 4))]
    norm = fit_normalizer(data)
    stacked = np.concatenate(data)
    assert np.allclose(norm.apply(stacked).mean(axis=0), 0.0, atol=1e-9)
    assert np.allclose(norm.apply(stacked).std(axis=0), 1.0, atol=1e-9)
    assert np.allclose(norm.invert(norm.apply(stacked)), stacked)

    back = load_normalizer(save_normalizer(norm, tmp_path / "n.nrm1"))
    assert np.array_equal(back.mean, norm.mean)
    assert np.array_equal(back.std, norm.std)


def test_normalizer_width_mismatch():
    norm = fit_normalizer([np.zeros((4, 3)) + np.arange(4)[:, None]])
    with pytest.raises(SignalError):
        norm.apply(np.zeros((2, 5)))


# ---------- MEL1 ----------

def test_mel_file_roundtrip(tmp_path):
    mel = mel_spectrogram(make_vowel(seconds=0.3))
    back = load_mel(save_mel(mel, tmp_path / "a.mel"))
    assert back.hop == 270 and back.sample_rate == 22050
    assert np.allclose(back.values, mel.values, atol=1e-5)


def test_mel_file_bad_magic(tmp_path):
    path = tmp_path / "bad.mel"
    path.write_bytes(b"XXXX" + bytes(16))
    with pytest.raises(FormatError) as exc:
        load_mel(path)
    assert exc.value.code == "corrupt-file"


def test_mel_file_truncated_payload(tmp_path):
    path = save_mel(mel_spectrogram(Waveform(np.zeros(2700))), tmp_path / "a.mel")
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(FormatError):
        load_mel(path)
