"""
Griffin-Lim fallback synthesis from a log-mel spectrogram.

The mel energies are mapped back to a linear magnitude spectrogram by
non-negative least squares against the analysis filterbank (floor cells
count as zero energy), then the phase is recovered by alternating
projections.  The STFT runs without centring on a signal that carries
n_fft // 2 extra samples on each side, so every iteration is an exact
least-squares projection and the spectral-convergence residual never
increases.  The extra samples are trimmed off at the end.
"""

import logging
from dataclasses import dataclass
from typing import List

import librosa
import numpy as np

from backend.data_ingestion.audio import Waveform
from backend.features.spectral import LOG_FLOOR, MelSpectrogram, StftConfig, build_mel_filterbank
from backend.src.core.errors import SignalError

logger = logging.getLogger(__name__)

DEFAULT_ITERATIONS = 60
# minimum residual improvement over the whole run
STALL_TOLERANCE = 1e-6


@dataclass(frozen=True)
class GriffinLimResult:
    waveform: Waveform
    # spectral convergence || |STFT(x)| - S || / || S || after each iteration
    residuals: List[float]


def mel_to_magnitude(mel: MelSpectrogram, fft_size: int = 1024) -> np.ndarray:
    """(n_fft // 2 + 1, T) linear magnitude whose mel projection best matches exp(mel)."""
    fb = build_mel_filterbank(n_mels=mel.n_mels, n_fft=fft_size, sr=mel.sample_rate)
    values = np.asarray(mel.values, dtype=np.float64)
    energy = np.where(values <= np.log(LOG_FLOOR) + 1e-6, 0.0, np.exp(values))
    if not energy.any():
        return np.zeros((fft_size // 2 + 1, mel.frame_count))
    return librosa.util.nnls(fb.weights, energy.T)


def griffin_lim(
    mel: MelSpectrogram,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 0,
    stft_cfg: StftConfig = StftConfig(),
) -> GriffinLimResult:
    if iterations < 1:
        raise SignalError(f"iterations must be >= 1, got {iterations}", code="invalid-input")
    if mel.frame_count < 1:
        raise SignalError("Cannot invert an empty mel-spectrogram", code="empty-signal")

    hop, n_fft = mel.hop, stft_cfg.fft_size
    target = mel_to_magnitude(mel, n_fft)
    frames = target.shape[1]
    padded_length = (frames - 1) * hop + n_fft
    kwargs = dict(n_fft=n_fft, hop_length=hop, win_length=stft_cfg.win_size, window=stft_cfg.window, center=False)

    rng = np.random.default_rng(seed)
    angles = np.exp(2j * np.pi * rng.random(target.shape))
    norm = float(np.linalg.norm(target))
    residuals: List[float] = []

    signal = librosa.istft(target * angles, length=padded_length, **kwargs)
    for _ in range(iterations):
        rebuilt = librosa.stft(signal, **kwargs)[:, :frames]
        residuals.append(float(np.linalg.norm(np.abs(rebuilt) - target) / norm) if norm > 0 else 0.0)
        angles = np.exp(1j * np.angle(rebuilt))
        signal = librosa.istft(target * angles, length=padded_length, **kwargs)

    start = n_fft // 2
    samples = signal[start : start + frames * hop]
    if samples.size < frames * hop:
        samples = np.pad(samples, (0, frames * hop - samples.size))

    if len(residuals) > 1 and residuals[0] > STALL_TOLERANCE and residuals[-1] >= residuals[0] - STALL_TOLERANCE:
        logger.warning(
            "Griffin-Lim stalled: residual %.4f after %d iterations (started at %.4f)",
            residuals[-1], iterations, residuals[0],
        )
    logger.info(
        "Griffin-Lim: %d frames, hop %d, %d iterations, final residual %.4f",
        frames, hop, iterations, residuals[-1],
    )
    return GriffinLimResult(waveform=Waveform(samples=samples, sample_rate=mel.sample_rate), residuals=residuals)
