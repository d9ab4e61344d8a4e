# audio.py

"""
Waveform IO and ultrasound/audio frame alignment.

- WAV files are mono 16-bit PCM at 22 050 Hz (read/written with soundfile)
- One ultrasound frame corresponds to one 270-sample audio hop
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import soundfile as sf

from backend.src.core.errors import FormatError, SignalError
from .ultrasound import UltrasoundSequence

logger = logging.getLogger(__name__)

SAMPLE_RATE = 22050
HOP = 270


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise SignalError(f"Waveform must be mono (1-D), got shape {samples.shape}")
        if self.sample_rate != SAMPLE_RATE:
            raise SignalError(
                f"Sample rate must be {SAMPLE_RATE} Hz, got {self.sample_rate}",
                code="invalid-input",
            )
        if not np.all(np.isfinite(samples)):
            raise SignalError("Waveform contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def rms(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.sqrt(np.mean(self.samples**2)))


def read_wav(path: Path | str) -> Waveform:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"WAV file not found: {path}", code="stage-dependency")
    try:
        samples, sample_rate = sf.read(str(path), dtype="float64", always_2d=False)
    except RuntimeError as e:  # libsndfile reports format problems this way
        raise FormatError(f"Cannot decode WAV {path}: {e}") from e
    if samples.ndim != 1:
        raise FormatError(f"{path}: expected mono audio, got {samples.shape[1]} channels")
    logger.debug("Read %d samples @ %d Hz from %s", samples.shape[0], sample_rate, path)
    return Waveform(samples=samples, sample_rate=int(sample_rate))


def write_wav(wav: Waveform, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    samples = wav.samples
    peak = float(np.max(np.abs(samples))) if len(wav) else 0.0
    if peak > 1.0:
        logger.warning("Clipping %s: peak %.3f exceeds full scale", path.name, peak)
        samples = np.clip(samples, -1.0, 1.0)
    sf.write(str(path), samples, wav.sample_rate, subtype="PCM_16", format="WAV")
    return path


# ---------- Alignment ----------

def audio_frame_count(num_samples: int, hop: int = HOP) -> int:
    """Centred-frame count of the STFT at ``hop`` (0 for an empty signal)."""
    if num_samples < 1:
        return 0
    return num_samples // hop + 1


def aligned_frame_count(ultrasound_frames: int, num_samples: int, hop: int = HOP) -> int:
    count = min(int(ultrasound_frames), audio_frame_count(num_samples, hop))
    if count <= 0:
        raise SignalError(
            f"No overlap between {ultrasound_frames} ultrasound frames and "
            f"{num_samples} audio samples",
            code="empty-overlap",
        )
    return count


@dataclass(frozen=True)
class AlignedStreams:
    frame_count: int
    ultrasound: UltrasoundSequence
    waveform: Waveform


def align_frames(us: UltrasoundSequence, wav: Waveform, hop: int = HOP) -> AlignedStreams:
    """
    Truncate both streams to T = min(ultrasound frames, audio frames at ``hop``).

    Audio is cut to at most T * hop samples; feature matrices computed from it
    are cut to T rows by the caller.
    """
    count = aligned_frame_count(us.frame_count, len(wav), hop)
    if count < us.frame_count or audio_frame_count(len(wav), hop) > count:
        logger.debug(
            "Aligning %d ultrasound frames with %d audio frames -> %d",
            us.frame_count, audio_frame_count(len(wav), hop), count,
        )
    samples = wav.samples[: count * hop]
    return AlignedStreams(
        frame_count=count,
        ultrasound=us.truncated(count),
        waveform=Waveform(samples, wav.sample_rate),
    )
