# backend/tests/conftest.py
import os
import sys

# Add project root to sys.path
TESTS_DIR = os.path.dirname(__file__)
PROJECT_ROOT = os.path.abspath(os.path.join(TESTS_DIR, "..", ".."))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

import json
from pathlib import Path

import numpy as np
import pytest
from scipy.signal import lfilter, sawtooth

from backend.data_ingestion.audio import SAMPLE_RATE, Waveform, write_wav
from backend.data_ingestion.ultrasound import UltrasoundSequence, write_ultrasound

SR = SAMPLE_RATE


def make_sine(freq: float = 1000.0, seconds: float = 1.0, amplitude: float = 1.0) -> Waveform:
    t = np.arange(int(seconds * SR)) / SR
    return Waveform(amplitude * np.sin(2 * np.pi * freq * t))


def make_sawtooth(freq: float = 120.0, seconds: float = 1.0, amplitude: float = 0.5) -> Waveform:
    t = np.arange(int(seconds * SR)) / SR
    return Waveform(amplitude * sawtooth(2 * np.pi * freq * t))


def make_vowel(f0: float = 150.0, seconds: float = 1.0, seed: int = 0) -> Waveform:
    """Impulse train through three formant resonators (an /a/-like vowel)."""
    n = int(seconds * SR)
    excitation = np.zeros(n)
    excitation[np.round(np.arange(0, n, SR / f0)).astype(int).clip(0, n - 1)] = 1.0
    excitation += 1e-3 * np.random.default_rng(seed).standard_normal(n)
    out = excitation
    for freq, bw in ((700.0, 130.0), (1220.0, 70.0), (2600.0, 160.0)):
        r = np.exp(-np.pi * bw / SR)
        theta = 2 * np.pi * freq / SR
        out = lfilter([1.0 - r], [1.0, -2 * r * np.cos(theta), r * r], out)
    return Waveform(0.5 * out / np.max(np.abs(out)))


def make_noise(seconds: float = 1.0, amplitude: float = 0.1, seed: int = 0) -> Waveform:
    return Waveform(amplitude * np.random.default_rng(seed).standard_normal(int(seconds * SR)))


@pytest.fixture
def vowel():
    return make_vowel()


@pytest.fixture
def toy_corpus(tmp_path):
    """
    Three synthetic utterances (ultrasound + speech) and a matching config file
    with the reduced CNN architecture.
    """
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    rng = np.random.default_rng(7)
    for i, f0 in enumerate((110.0, 140.0, 170.0)):
        frames = 24
        wav = make_vowel(f0=f0, seconds=frames * 270 / SR, seed=i)
        write_wav(wav, corpus / f"utt{i}.wav")
        base = np.linspace(0, 200, 16 * 20).reshape(16, 20)
        images = np.stack([(base + 30 * np.sin(k / 3.0 + i)) % 255 for k in range(frames)])
        images = (images + rng.integers(0, 20, images.shape)).clip(0, 255).astype(np.uint8)
        write_ultrasound(UltrasoundSequence(images, fps=81.67), corpus / f"utt{i}.bin")

    config = {
        "paths": {"corpus_root": str(corpus), "output_root": str(tmp_path / "out")},
        "features": "mel",
        "architecture": {
            "input_height": 8,
            "input_width": 16,
            "kernel_size": 3,
            "conv_blocks": [[2, 3], [3, 4]],
            "dense_units": 8,
            "dropout": 0.2,
        },
        "train": {"learning_rate": 0.01, "batch_size": 8, "max_epochs": 5, "patience": 3, "seed": 3},
        "griffin_lim_iterations": 8,
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    return config_path
