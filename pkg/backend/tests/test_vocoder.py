# backend/tests/test_vocoder.py
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
from pydantic import ValidationError
from scipy.signal import butter, medfilt, sawtooth, sosfiltfilt, welch

from backend.data_ingestion.audio import Waveform
from backend.evaluation.mcd import waveform_mcd
from backend.src.core.errors import FormatError, SignalError
from backend.vocoder import (
    ContParams,
    MgcConfig,
    analyze_contparams,
    analyze_mgc,
    estimate_mvf,
    load_contparams,
    lsp_to_mgc,
    mgc_criterion,
    mgc_log_spectrum,
    mgc_to_lsp,
    save_contparams,
    synthesize,
    track_contf0,
)
from backend.vocoder.framing import frame_count
from backend.vocoder.mgc import analysis_frames, fit_mgc_frame, is_minimum_phase
from backend.vocoder.mvf import MVF_MAX, MVF_MIN, voiced_run_end
from backend.vocoder.pitch import F0_MAX, F0_MIN, MAX_LOG_STEP
from backend.vocoder.synthesis import mglsa_filter, mixed_excitation, pitch_marks
from conftest import make_noise, make_sawtooth, make_vowel

CFG = MgcConfig()


def _random_min_phase_mgc(seed: int, cfg: MgcConfig = CFG) -> np.ndarray:
    rng = np.random.default_rng(seed)
    angles = np.linspace(0.2, 2.9, cfg.order // 2) + rng.uniform(-0.05, 0.05, cfg.order // 2)
    radii = rng.uniform(0.3, 0.85, cfg.order // 2)
    roots = radii * np.exp(1j * angles)
    a = np.real(np.poly(np.concatenate([roots, roots.conj()])))
    return np.concatenate(([rng.normal()], a[1:] / cfg.gamma))


# ---------- Configuration ----------

def test_mgc_config_defaults():
    assert CFG.order == 24
    assert CFG.alpha == pytest.approx(0.455)
    assert CFG.stages == 3
    assert CFG.as_mel_cepstrum().gamma == 0.0


@pytest.mark.parametrize("overrides", [{"alpha": 1.2}, {"gamma": -0.4}, {"gamma": 0.5}, {"order": 0}])
def test_mgc_config_rejects_bad_values(overrides):
    with pytest.raises(ValidationError):
        MgcConfig(**overrides)


# ---------- MGC analysis ----------

def test_analyze_mgc_shape_and_stability(vowel):
    mgc = analyze_mgc(vowel)
    assert mgc.shape == (len(vowel) // 270 + 1, 25)
    assert np.all(np.isfinite(mgc))
    assert all(is_minimum_phase(frame[1:], CFG.gamma) for frame in mgc)


def test_fitted_frame_is_local_minimum(vowel):
    frame = analysis_frames(vowel, CFG)[40]
    mgc = fit_mgc_frame(frame, CFG)
    best = mgc_criterion(mgc, frame, CFG)

    flat = np.zeros_like(mgc)
    assert best < mgc_criterion(flat, frame, CFG)

    rng = np.random.default_rng(0)
    for _ in range(10):
        direction = rng.standard_normal(CFG.order)
        trial = mgc.copy()
        trial[1:] += 0.05 * direction / np.linalg.norm(direction)
        assert mgc_criterion(trial, frame, CFG) >= best - 1e-7


def test_silent_frames_get_floor_gain(caplog):
    with caplog.at_level(logging.WARNING):
        mgc = analyze_mgc(Waveform(np.zeros(2700)))
    assert "11 of 11 frames below the silence threshold" in caplog.text
    assert mgc.shape == (11, 25)
    assert np.all(mgc[:, 1:] == 0.0)
    assert np.all(mgc[:, 0] == mgc[0, 0])


def test_model_spectrum_follows_formants(vowel):
    mgc = analyze_mgc(vowel)[40]
    spectrum = mgc_log_spectrum(mgc, CFG)
    freqs = np.linspace(0, 11025, spectrum.size)
    low = spectrum[(freqs > 500) & (freqs < 900)].max()
    high = spectrum[(freqs > 6000) & (freqs < 9000)].max()
    assert low > high + 3.0


def test_flat_model_spectrum_is_twice_the_gain():
    mgc = np.zeros(25)
    mgc[0] = 0.7
    assert np.allclose(mgc_log_spectrum(mgc, CFG), 1.4)


def test_white_noise_gives_flat_model():
    mgc = analyze_mgc(make_noise(1.0, amplitude=0.1, seed=3))[2:-2]
    # single frames scatter, the average envelope is flat
    assert np.all(np.abs(mgc[:, 1:].mean(axis=0)) < 0.05)
    assert np.median(mgc[:, 0]) == pytest.approx(np.log(0.1), abs=0.2)


# ---------- LSP conversion ----------

def test_flat_frame_lsps_are_evenly_spaced():
    gain, lsp = mgc_to_lsp(np.zeros(25))
    assert gain == 0.0
    assert np.allclose(lsp, np.arange(1, 25) * np.pi / 25, atol=1e-9)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_lsp_roundtrip_for_minimum_phase_frames(seed):
    mgc = _random_min_phase_mgc(seed)
    gain, lsp = mgc_to_lsp(mgc)
    assert lsp.shape == (24,)
    assert np.all(np.diff(lsp) > 0)
    assert 0 < lsp[0] and lsp[-1] < np.pi
    assert np.allclose(lsp_to_mgc(lsp, gain), mgc, atol=1e-6)


def test_non_minimum_phase_frame_is_rejected():
    cfg = MgcConfig(order=2)
    # A(z) = 1 + 4 z^-2 has both roots at radius 2
    mgc = np.array([0.0, 0.0, 4.0 / cfg.gamma])
    with pytest.raises(SignalError) as exc:
        mgc_to_lsp(mgc, cfg)
    assert exc.value.code == "unstable-frame"


def test_lsp_form_needs_negative_gamma():
    with pytest.raises(SignalError) as exc:
        mgc_to_lsp(np.zeros(25), CFG.as_mel_cepstrum())
    assert exc.value.code == "invalid-params"


# ---------- ContF0 ----------

def test_contf0_follows_sawtooth():
    wav = make_sawtooth(120.0, seconds=1.0)
    log_f0 = track_contf0(wav)
    assert log_f0.shape == (frame_count(len(wav), 270),)
    assert np.all(np.abs(np.exp(log_f0) - 120.0) <= 2.0)


def test_contf0_defined_in_silence():
    log_f0 = track_contf0(Waveform(np.zeros(5400)))
    assert np.all(np.isfinite(log_f0))
    assert np.allclose(np.exp(log_f0), np.sqrt(F0_MIN * F0_MAX))


def test_contf0_is_bounded_and_continuous():
    # voiced, noise, voiced
    wav = Waveform(np.concatenate([
        make_sawtooth(100.0, 0.4).samples,
        make_noise(0.3, seed=1).samples,
        make_sawtooth(220.0, 0.4).samples,
    ]))
    log_f0 = track_contf0(wav)
    assert np.all(np.isfinite(log_f0))
    assert np.all(log_f0 >= np.log(F0_MIN) - 1e-12)
    assert np.all(log_f0 <= np.log(F0_MAX) + 1e-12)
    assert np.all(np.abs(np.diff(log_f0)) <= MAX_LOG_STEP + 1e-12)


def test_contf0_tracks_rising_chirp():
    t = np.arange(2 * 22050) / 22050
    # 100 Hz rising linearly to 200 Hz
    wav = Waveform(0.5 * sawtooth(2 * np.pi * (100.0 * t + 25.0 * t**2)))
    f0 = np.exp(medfilt(track_contf0(wav), 5)[3:-3])
    assert np.all(np.diff(np.log(f0)) >= -2e-3)
    assert f0[0] == pytest.approx(100.0, rel=0.05)
    assert f0[-1] == pytest.approx(200.0, rel=0.05)


def test_contf0_empty_signal():
    with pytest.raises(SignalError) as exc:
        track_contf0(Waveform(np.zeros(0)))
    assert exc.value.code == "empty-signal"


# ---------- MVF ----------

def test_voiced_run_end_stops_at_first_miss():
    assert voiced_run_end(np.array([10.0, 10.0, 0.0, 10.0, 10.0])) == 2
    assert voiced_run_end(np.array([10.0, 10.0, 10.0])) == 3
    assert voiced_run_end(np.array([0.0, 10.0, 10.0])) == 0
    assert voiced_run_end(np.array([])) == 0


def test_mvf_high_for_harmonic_signal():
    wav = make_sawtooth(120.0, seconds=1.0)
    log_f0 = np.full(frame_count(len(wav), 270), np.log(120.0))
    mvf = np.exp(estimate_mvf(wav, log_f0))
    assert mvf.shape == log_f0.shape
    assert np.median(mvf) > 4000.0


def _harmonics(f0: float, count: int, amplitude: float, seconds: float = 1.0) -> np.ndarray:
    t = np.arange(int(seconds * 22050)) / 22050
    return amplitude * np.cos(2 * np.pi * f0 * np.outer(t, np.arange(1, count + 1))).sum(axis=1)


def test_mvf_stops_at_band_edge():
    # harmonics up to 3900 Hz, noise only above 4 kHz
    noise = 0.05 * np.random.default_rng(0).standard_normal(22050)
    noise = sosfiltfilt(butter(8, 4000.0, btype="highpass", fs=22050, output="sos"), noise)
    wav = Waveform(_harmonics(150.0, 26, 0.03) + noise)
    log_f0 = np.full(frame_count(len(wav), 270), np.log(150.0))
    mvf = np.exp(estimate_mvf(wav, log_f0))[6:-6]
    assert np.all((mvf >= 3500.0) & (mvf <= 4500.0))


def test_mvf_full_band_harmonics():
    wav = Waveform(_harmonics(150.0, 73, 1.0 / 73))
    log_f0 = np.full(frame_count(len(wav), 270), np.log(150.0))
    mvf = np.exp(estimate_mvf(wav, log_f0))[6:-6]
    assert np.all(mvf > 9000.0)


def test_mvf_low_for_noise():
    wav = make_noise(1.0)
    log_f0 = np.full(frame_count(len(wav), 270), np.log(150.0))
    mvf = np.exp(estimate_mvf(wav, log_f0))
    assert np.all(mvf >= MVF_MIN - 1e-6) and np.all(mvf <= MVF_MAX + 1e-6)
    assert np.mean(np.isclose(mvf, MVF_MIN)) >= 0.9


def test_mvf_rejects_non_finite_f0():
    with pytest.raises(SignalError):
        estimate_mvf(make_noise(0.1), np.array([np.nan, 5.0]))


# ---------- ContParams ----------

def _params(frames: int = 4) -> ContParams:
    lsp = np.tile(np.arange(1, 25) * np.pi / 25, (frames, 1))
    return ContParams(
        gain=np.full(frames, -2.0),
        lsp=lsp,
        log_f0=np.full(frames, np.log(120.0)),
        log_mvf=np.full(frames, np.log(4000.0)),
    )


def test_contparams_validation():
    assert _params().violations() == []
    bad = _params()
    bad.lsp[1, [3, 4]] = bad.lsp[1, [4, 3]]
    with pytest.raises(SignalError) as exc:
        bad.validate()
    assert exc.value.code == "invalid-params"
    assert ContParams(bad.gain, bad.lsp, np.full(4, np.log(30.0)), bad.log_mvf).violations()[-1].startswith("f0")


def test_contparams_shape_mismatch():
    with pytest.raises(SignalError):
        ContParams(gain=np.zeros(3), lsp=np.zeros((4, 24)), log_f0=np.zeros(3), log_mvf=np.zeros(3))


def test_repaired_records_validate(caplog):
    records = _params().to_records()
    records[0, 1:25] = np.random.default_rng(0).uniform(-1.0, 4.0, 24)
    records[1, 25] = np.log(900.0)
    records[2, 26] = np.log(100.0)
    with caplog.at_level(logging.WARNING):
        fixed = ContParams.repaired(records, order=24)
    assert "Clamped 3 of 4 predicted frames" in caplog.text
    assert fixed.violations() == []
    assert np.exp(fixed.log_f0[1]) == pytest.approx(F0_MAX)
    assert np.exp(fixed.log_mvf[2]) == pytest.approx(MVF_MIN)


def test_cvp_file_roundtrip(tmp_path):
    params = _params()
    back = load_contparams(save_contparams(params, tmp_path / "a.cvp"))
    assert back.order == 24 and back.frame_count == 4
    assert np.allclose(back.to_records(), params.to_records(), atol=1e-6)

    path = tmp_path / "a.cvp"
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(FormatError):
        load_contparams(path)


def test_analyze_contparams_produces_valid_params(vowel):
    params = analyze_contparams(vowel)
    assert params.frame_count == len(vowel) // 270 + 1
    assert params.order == 24
    assert params.violations() == []


# ---------- Synthesis ----------

def test_pitch_marks_follow_period():
    marks = pitch_marks(np.full(22050, 100.0))
    assert marks[0] == 0
    assert set(np.diff(marks).tolist()) <= {220, 221}
    assert marks.size == 100


def test_mixed_excitation_splits_bands():
    rng = np.random.default_rng(0)
    frames, hop = 80, 270
    white = rng.standard_normal(frames * hop)
    log_mvf = np.full(frames, np.log(4000.0))

    voiced_only = mixed_excitation(white, np.zeros_like(white), log_mvf, hop)
    noise_only = mixed_excitation(np.zeros_like(white), white, log_mvf, hop)
    freqs, p_voiced = welch(voiced_only, fs=22050, nperseg=1024)
    _, p_noise = welch(noise_only, fs=22050, nperseg=1024)
    low, high = freqs < 2500, freqs > 6000
    assert p_voiced[high].mean() < 0.01 * p_voiced[low].mean()
    assert p_noise[low].mean() < 0.01 * p_noise[high].mean()


def test_flat_mglsa_filter_only_applies_gain():
    excitation = np.random.default_rng(1).standard_normal(10 * 270)
    mgc = np.zeros((10, 25))
    mgc[:, 0] = np.log(0.5)
    out = mglsa_filter(excitation, mgc, 270, CFG)
    assert np.allclose(out, 0.5 * excitation, atol=1e-6)


def test_synthesize_length_and_determinism():
    params = _params(frames=20)
    a = synthesize(params, seed=5)
    b = synthesize(params, seed=5)
    c = synthesize(params, seed=6)
    assert len(a) == 20 * 270
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_synthesized_energy_matches_model(vowel):
    params = analyze_contparams(vowel)
    resynth = synthesize(params, seed=0)
    model_power = [
        np.mean(np.exp(mgc_log_spectrum(lsp_to_mgc(lsp, gain), CFG)))
        for gain, lsp in zip(params.gain, params.lsp)
    ]
    ratio = np.sqrt(np.mean(resynth.samples**2) / np.mean(model_power))
    assert 0.5 <= ratio <= 2.0


def test_synthesize_rejects_bad_constant_f0():
    with pytest.raises(SignalError) as exc:
        synthesize(_params(), constant_f0=-10.0)
    assert exc.value.code == "invalid-params"


def test_copy_synthesis_keeps_pitch_and_envelope(vowel):
    params = analyze_contparams(vowel)
    resynth = synthesize(params, seed=0)
    assert len(resynth) == params.frame_count * 270

    f0 = np.exp(np.median(track_contf0(resynth)))
    assert f0 == pytest.approx(150.0, rel=0.05)

    copy_mcd, frames = waveform_mcd(vowel, resynth)
    noise_mcd, _ = waveform_mcd(vowel, make_noise(len(vowel) / 22050))
    assert frames == min(params.frame_count, len(resynth) // 270 + 1)
    assert copy_mcd < 3.0
    assert copy_mcd < noise_mcd
