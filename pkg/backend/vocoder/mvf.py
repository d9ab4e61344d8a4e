"""
Maximum voiced frequency estimation by harmonic prominence.

For every frame the harmonics k * f0 are scored by their peak-to-valley
ratio in the power spectrum; the voiced band ends at the first harmonic
(counting up from the fundamental) that is not prominent.
"""

import logging

import numpy as np
from scipy.ndimage import median_filter
from scipy.signal import get_window

from backend.data_ingestion.audio import HOP, SAMPLE_RATE, Waveform
from backend.src.core.errors import SignalError
from .framing import clamped_frames

logger = logging.getLogger(__name__)

MVF_MIN = 500.0
MVF_MAX = SAMPLE_RATE / 2.0
FRAME_LENGTH = 2048
FFT_SIZE = 4096
PROMINENCE_DB = 6.0
PEAK_HALF_WIDTH = 0.25
VALLEY_HALF_WIDTH = 0.15
MEDIAN_WIDTH = 5


def harmonic_prominence(power: np.ndarray, f0: float, sample_rate: int, fft_size: int) -> np.ndarray:
    """Peak-to-valley ratio in dB for harmonics k = 1, 2, ... below Nyquist."""
    bin_hz = sample_rate / fft_size
    nyquist = sample_rate / 2.0
    cumulative = np.concatenate(([0.0], np.cumsum(power)))

    def band(lo: float, hi: float):
        i0 = int(np.ceil(max(lo, 0.0) / bin_hz))
        i1 = int(np.floor(min(hi, nyquist) / bin_hz)) + 1
        return i0, max(i1, i0 + 1)

    scores = []
    k = 1
    while (k + 0.65) * f0 < nyquist:
        centre = k * f0
        p0, p1 = band(centre - PEAK_HALF_WIDTH * f0, centre + PEAK_HALF_WIDTH * f0)
        peak = power[p0:p1].max()
        total, count = 0.0, 0
        for mid in (centre - 0.5 * f0, centre + 0.5 * f0):
            v0, v1 = band(mid - VALLEY_HALF_WIDTH * f0, mid + VALLEY_HALF_WIDTH * f0)
            total += cumulative[v1] - cumulative[v0]
            count += v1 - v0
        valley = total / count
        scores.append(10.0 * np.log10(max(peak, 1e-30) / max(valley, 1e-30)))
        k += 1
    return np.asarray(scores)


def voiced_run_end(prominence_db: np.ndarray, threshold: float = PROMINENCE_DB) -> int:
    """Harmonic number of the last prominent harmonic before the first miss, 0 if none."""
    prominent = np.asarray(prominence_db) > threshold
    if prominent.all():
        return int(prominent.size)
    return int(np.argmin(prominent))


def estimate_mvf(wav: Waveform, log_f0: np.ndarray, hop: int = HOP) -> np.ndarray:
    """Per-frame natural-log MVF in Hz, median filtered and clamped to [500, 11025]."""
    if wav.sample_rate != SAMPLE_RATE:
        raise SignalError(f"Expected {SAMPLE_RATE} Hz audio, got {wav.sample_rate}")
    log_f0 = np.asarray(log_f0, dtype=np.float64)
    if log_f0.ndim != 1 or not np.all(np.isfinite(log_f0)):
        raise SignalError("F0 contour must be a finite 1-D array")

    count = log_f0.size
    frames = clamped_frames(wav.samples, FRAME_LENGTH, hop, count)
    window = get_window("hann", FRAME_LENGTH)
    power = np.abs(np.fft.rfft(frames * window, FFT_SIZE, axis=1)) ** 2

    mvf = np.full(count, MVF_MIN)
    for t in range(count):
        f0 = float(np.exp(log_f0[t]))
        last = voiced_run_end(harmonic_prominence(power[t], f0, wav.sample_rate, FFT_SIZE))
        if last:
            mvf[t] = last * f0

    if count:
        mvf = median_filter(mvf, size=MEDIAN_WIDTH, mode="nearest")
    mvf = np.clip(mvf, MVF_MIN, MVF_MAX)
    logger.info("MVF: %d frames, median %.0f Hz", count, float(np.median(mvf)) if count else 0.0)
    return np.log(mvf)
