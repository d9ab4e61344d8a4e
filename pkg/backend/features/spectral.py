"""
STFT and HTK-scale mel-spectrogram extraction.

- Hann window, fft_size = win_size = 1024, hop 270 (one hop per ultrasound frame)
- Centred framing with reflect padding: frame t is centred on sample t * hop,
  giving T = N // hop + 1 frames
- 80 triangular HTK filters between 0 and 8 kHz, each row normalized to unit
  area over Hz (row.sum() * sr / n_fft == 1)
- values = ln(max(fb @ |X| ** MEL_POWER, 1e-5))
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import librosa
import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from backend.data_ingestion.audio import HOP, SAMPLE_RATE, Waveform
from backend.src.core.errors import SignalError
from backend.src.utils.binary_io import read_mel_file, write_mel_file

logger = logging.getLogger(__name__)

# 1.0 projects STFT magnitude, 2.0 would project power
MEL_POWER = 1.0
LOG_FLOOR = 1e-5
N_MELS = 80
MEL_FMIN = 0.0
MEL_FMAX = 8000.0


class StftConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    sample_rate: int = SAMPLE_RATE
    fft_size: int = 1024
    win_size: int = 1024
    hop: int = HOP
    window: Literal["hann"] = "hann"
    pad_mode: Literal["reflect"] = "reflect"

    @model_validator(mode="after")
    def _check(self) -> "StftConfig":
        if self.win_size > self.fft_size:
            raise ValueError(f"win_size {self.win_size} exceeds fft_size {self.fft_size}")
        if self.hop < 1:
            raise ValueError("hop must be >= 1")
        return self

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1


class MelConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_mels: int = N_MELS
    fmin: float = MEL_FMIN
    fmax: float = MEL_FMAX


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray  # (n_mels, n_fft // 2 + 1)
    fmin: float
    fmax: float
    sample_rate: int
    n_fft: int

    @property
    def n_mels(self) -> int:
        return int(self.weights.shape[0])

    @property
    def center_frequencies(self) -> np.ndarray:
        edges = librosa.mel_frequencies(self.n_mels + 2, fmin=self.fmin, fmax=self.fmax, htk=True)
        return edges[1:-1]


@dataclass(frozen=True)
class MelSpectrogram:
    values: np.ndarray  # (T, n_mels) natural-log mel energies
    hop: int
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise SignalError(f"Mel-spectrogram must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise SignalError("Mel-spectrogram contains non-finite values")
        if values.size and values.min() < np.log(LOG_FLOOR) - 1e-4:
            raise SignalError("Mel-spectrogram values fall below the ln(1e-5) floor")

    @classmethod
    def clamped(cls, values: np.ndarray, hop: int, sample_rate: int = SAMPLE_RATE) -> "MelSpectrogram":
        """Wrap predicted values, lifting anything under the log floor."""
        values = np.asarray(values)
        lifted = int(np.count_nonzero(values < np.log(LOG_FLOOR)))
        if lifted:
            logger.warning("Clamped %d mel cells up to the ln(%g) floor", lifted, LOG_FLOOR)
        return cls(np.maximum(values, np.log(LOG_FLOOR)), hop, sample_rate)

    @property
    def frame_count(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_mels(self) -> int:
        return int(self.values.shape[1])


def hz_to_mel(frequency):
    """HTK mel scale: 2595 * log10(1 + f / 700)."""
    return librosa.hz_to_mel(frequency, htk=True)


def stft(wav: Waveform, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """One-sided complex STFT, shape (T, fft_size // 2 + 1)."""
    if wav.sample_rate != cfg.sample_rate:
        raise SignalError(f"Expected {cfg.sample_rate} Hz audio, got {wav.sample_rate}")
    if len(wav) < 1:
        raise SignalError("Cannot analyse an empty signal", code="empty-signal")

    spec = librosa.stft(
        wav.samples,
        n_fft=cfg.fft_size,
        hop_length=cfg.hop,
        win_length=cfg.win_size,
        window=cfg.window,
        center=True,
        pad_mode=cfg.pad_mode,
    )
    return spec.T


def build_mel_filterbank(
    fmin: float = MEL_FMIN,
    fmax: float = MEL_FMAX,
    n_mels: int = N_MELS,
    n_fft: int = 1024,
    sr: int = SAMPLE_RATE,
) -> MelFilterbank:
    if not 0 <= fmin < fmax <= sr / 2:
        raise SignalError(
            f"Need 0 <= fmin < fmax <= {sr / 2}, got fmin={fmin} fmax={fmax}",
            code="invalid-range",
        )

    weights = librosa.filters.mel(
        sr=sr, n_fft=n_fft, n_mels=n_mels, fmin=fmin, fmax=fmax, htk=True, norm=None
    ).astype(np.float64)

    area = weights.sum(axis=1) * (sr / n_fft)
    empty = np.flatnonzero(area <= 0)
    if empty.size:
        raise SignalError(
            f"Mel filters {empty.tolist()} have no FFT bins; lower n_mels or raise n_fft",
            code="invalid-range",
        )
    weights /= area[:, None]
    return MelFilterbank(weights=weights, fmin=float(fmin), fmax=float(fmax), sample_rate=sr, n_fft=n_fft)


def mel_spectrogram(
    wav: Waveform,
    cfg: StftConfig = StftConfig(),
    fb: MelFilterbank | None = None,
) -> MelSpectrogram:
    if fb is None:
        fb = build_mel_filterbank(n_fft=cfg.fft_size, sr=cfg.sample_rate)
    if fb.weights.shape[1] != cfg.n_bins:
        raise SignalError(
            f"Filterbank has {fb.weights.shape[1]} bins, STFT produces {cfg.n_bins}"
        )

    magnitude = np.abs(stft(wav, cfg)) ** MEL_POWER
    mel = magnitude @ fb.weights.T
    values = np.log(np.maximum(mel, LOG_FLOOR))
    return MelSpectrogram(values=values, hop=cfg.hop, sample_rate=cfg.sample_rate)


def save_mel(mel: MelSpectrogram, path: Path | str) -> Path:
    return write_mel_file(path, mel.values, mel.hop, mel.sample_rate)


def load_mel(path: Path | str) -> MelSpectrogram:
    values, hop, sample_rate = read_mel_file(path)
    return MelSpectrogram(values=values, hop=hop, sample_rate=sample_rate)
