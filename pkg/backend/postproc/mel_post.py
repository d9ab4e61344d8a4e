"""
Predicted mel-spectrogram post-processing.

- resample_hop: Keys cubic convolution along time, hop 270 -> 256
- savgol_smooth: window-5 cubic Savitzky-Golay per channel, mirror edges
- export_conditioning: MEL1 file for an external neural vocoder (hop 256 only)
"""

import logging
import math
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.signal import savgol_coeffs, savgol_filter

from backend.data_ingestion.audio import HOP
from backend.features.spectral import MelSpectrogram, save_mel
from backend.src.core.errors import SignalError
from backend.src.utils.interpolation import cubic_weight_matrix

logger = logging.getLogger(__name__)

VOCODER_HOP = 256
MIN_RESAMPLE_FRAMES = 4


class SmoothingConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    window: int = 5
    polyorder: int = 3

    @model_validator(mode="after")
    def _check(self) -> "SmoothingConfig":
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window must be a positive odd number, got {self.window}")
        if not 0 <= self.polyorder < self.window:
            raise ValueError(f"polyorder must be in [0, window), got {self.polyorder}")
        return self


def smoothing_kernel(cfg: SmoothingConfig = SmoothingConfig()) -> np.ndarray:
    """Least-squares smoothing coefficients, oldest frame first."""
    return savgol_coeffs(cfg.window, cfg.polyorder, use="dot")


def resampled_length(frames: int, hop_in: int, hop_out: int) -> int:
    return math.ceil(frames * hop_in / hop_out)


def resample_matrix(values: np.ndarray, hop_in: int = HOP, hop_out: int = VOCODER_HOP) -> np.ndarray:
    """
    Time-resample a (T, C) matrix: output row j samples input time j * hop_out / hop_in
    with the Keys kernel (a = -0.5), clamping at the edges.
    """
    values = np.asarray(values, dtype=np.float64)
    frames = values.shape[0]
    if frames < MIN_RESAMPLE_FRAMES:
        raise SignalError(
            f"Need at least {MIN_RESAMPLE_FRAMES} frames to resample, got {frames}", code="too-short"
        )
    out_frames = resampled_length(frames, hop_in, hop_out)
    positions = np.arange(out_frames) * (hop_out / hop_in)
    return cubic_weight_matrix(positions, frames) @ values


def resample_hop(mel: MelSpectrogram, hop_out: int = VOCODER_HOP) -> MelSpectrogram:
    values = resample_matrix(mel.values, mel.hop, hop_out)
    logger.debug("Resampled mel %d -> %d frames (hop %d -> %d)", mel.frame_count, values.shape[0], mel.hop, hop_out)
    return MelSpectrogram.clamped(values, hop_out, mel.sample_rate)


def savgol_smooth(mel: MelSpectrogram, cfg: SmoothingConfig = SmoothingConfig()) -> MelSpectrogram:
    if mel.frame_count < cfg.window:
        raise SignalError(
            f"Need at least {cfg.window} frames to smooth, got {mel.frame_count}", code="too-short"
        )
    values = savgol_filter(np.asarray(mel.values, dtype=np.float64), cfg.window, cfg.polyorder, axis=0, mode="mirror")
    return MelSpectrogram.clamped(values, mel.hop, mel.sample_rate)


def postprocess_mel(mel: MelSpectrogram, cfg: SmoothingConfig = SmoothingConfig()) -> MelSpectrogram:
    """Resample to the vocoder hop, then smooth."""
    return savgol_smooth(resample_hop(mel), cfg)


def export_conditioning(mel: MelSpectrogram, path: Path | str) -> Path:
    if mel.hop != VOCODER_HOP:
        raise SignalError(
            f"Conditioning files must use hop {VOCODER_HOP}, got hop {mel.hop}; run resample_hop first",
            code="wrong-hop",
        )
    out = save_mel(mel, path)
    logger.info("Exported conditioning %dx%d -> %s", mel.frame_count, mel.n_mels, out)
    return out
