"""Frame slicing shared by the vocoder analysers."""

import librosa
import numpy as np


def centered_frames(samples: np.ndarray, frame_length: int, hop: int) -> np.ndarray:
    """
    (T, frame_length) frames centred on t * hop with reflect padding.

    frame_length must be even so that T = N // hop + 1, the STFT frame count.
    """
    if frame_length % 2:
        raise ValueError("frame_length must be even")
    samples = np.asarray(samples, dtype=np.float64)
    half = frame_length // 2
    mode = "reflect" if samples.size > 1 else "constant"
    padded = np.pad(samples, (half, half), mode=mode)
    return librosa.util.frame(padded, frame_length=frame_length, hop_length=hop, axis=0)


def clamped_frames(samples: np.ndarray, frame_length: int, hop: int, count: int) -> np.ndarray:
    """
    (count, frame_length) frames nominally centred on t * hop but shifted
    inwards at the edges so that every frame holds real signal only.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < frame_length:
        samples = np.pad(samples, (0, frame_length - samples.size))
    last_start = samples.size - frame_length
    starts = np.clip(np.arange(count) * hop - frame_length // 2, 0, last_start)
    return samples[starts[:, None] + np.arange(frame_length)[None, :]]


def frame_count(num_samples: int, hop: int) -> int:
    return num_samples // hop + 1 if num_samples > 0 else 0
