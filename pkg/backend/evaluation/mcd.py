"""
Mel-cepstral distortion.

    MCD = mean_t (10 / ln 10) * sqrt(2 * sum_{d >= 1} (ref[t, d] - test[t, d]) ** 2)

Coefficient 0 (energy) is excluded. Sequences must already be aligned;
`align_lengths` truncates to the shorter one (no DTW).
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from backend.data_ingestion.audio import Waveform
from backend.src.core.errors import SignalError
from backend.src.utils.data_utils import write_tsv
from backend.vocoder.mgc import MgcConfig, analyze_mgc

logger = logging.getLogger(__name__)

MCD_SCALE = 10.0 / np.log(10.0) * np.sqrt(2.0)


def mcd(ref: np.ndarray, test: np.ndarray) -> float:
    """Frame-averaged MCD in dB between two aligned (T, 1 + order) cepstral matrices."""
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape:
        raise SignalError(f"MCD inputs differ in shape: {ref.shape} vs {test.shape}", code="length-mismatch")
    if ref.ndim != 2 or ref.shape[1] < 2 or ref.shape[0] == 0:
        raise SignalError(f"MCD needs a non-empty (T, >=2) matrix, got {ref.shape}")
    diff = ref[:, 1:] - test[:, 1:]
    return float(np.mean(MCD_SCALE * np.sqrt(np.sum(diff**2, axis=1))))


def align_lengths(ref: np.ndarray, test: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    frames = min(ref.shape[0], test.shape[0])
    if ref.shape[0] != test.shape[0]:
        logger.debug("Truncating MCD inputs %d/%d -> %d frames", ref.shape[0], test.shape[0], frames)
    return ref[:frames], test[:frames]


def waveform_to_melcepstra(wav: Waveform, cfg: MgcConfig = MgcConfig()) -> np.ndarray:
    """Order-24 mel-cepstra (gamma = 0) per 270-sample frame."""
    return analyze_mgc(wav, cfg.as_mel_cepstrum())


def waveform_mcd(ref: Waveform, test: Waveform, cfg: MgcConfig = MgcConfig()) -> Tuple[float, int]:
    """(MCD dB, frames used) between two waveforms."""
    a, b = align_lengths(waveform_to_melcepstra(ref, cfg), waveform_to_melcepstra(test, cfg))
    return mcd(a, b), a.shape[0]


@dataclass
class McdReport:
    values: Dict[str, float] = field(default_factory=dict)
    frames: Dict[str, int] = field(default_factory=dict)

    def add(self, utterance: str, value: float, frames: int) -> None:
        if value < 0:
            raise SignalError(f"Negative MCD for {utterance}: {value}")
        self.values[utterance] = value
        self.frames[utterance] = frames

    @property
    def mean(self) -> float:
        return float(np.mean(list(self.values.values()))) if self.values else float("nan")

    @property
    def total_frames(self) -> int:
        return int(sum(self.frames.values()))

    def write(self, path: Path | str) -> Path:
        rows = [(utt, self.values[utt], self.frames[utt]) for utt in sorted(self.values)]
        rows.append(("mean", self.mean, self.total_frames))
        return write_tsv(path, ("utterance", "mcd_db", "frames"), rows)
