"""
Continuous F0 tracker.

Per frame, a normalised cross-correlation (NCCF) over lags for 50..400 Hz
gives one candidate period and a voicing score.  A Kalman filter with a
backward (RTS) pass smooths log F0; unvoiced and silent frames are treated as
missing observations, so the contour is defined everywhere.
"""

import logging

import numpy as np
from scipy.signal import correlate

from backend.data_ingestion.audio import HOP, SAMPLE_RATE, Waveform
from backend.src.core.errors import SignalError
from .framing import clamped_frames, frame_count

logger = logging.getLogger(__name__)

F0_MIN = 50.0
F0_MAX = 400.0
FRAME_LENGTH = 1024
# candidate selection: earliest peak within this fraction of the best one
PEAK_RATIO = 0.9
VOICING_THRESHOLD = 0.4
PROCESS_STD = 0.03
OBSERVATION_STD = 0.02
PRIOR_STD = 1.0
MAX_LOG_STEP = 0.08
SILENCE_ENERGY = 1e-10


def _lag_range(sample_rate: int):
    return int(np.ceil(sample_rate / F0_MAX)), int(np.floor(sample_rate / F0_MIN))


def nccf(frame: np.ndarray, min_lag: int, max_lag: int) -> np.ndarray:
    """Normalised cross-correlation r(lag) for lag = 0..max_lag."""
    width = frame.size - max_lag
    ref = frame[:width]
    cross = correlate(frame[: width + max_lag], ref, mode="valid")
    csum = np.concatenate(([0.0], np.cumsum(frame**2)))
    energy = csum[width : width + max_lag + 1] - csum[: max_lag + 1]
    denom = np.sqrt(np.maximum(energy * energy[0], 1e-20))
    return cross / denom


def pick_candidate(r: np.ndarray, min_lag: int, sample_rate: int):
    """(f0, voicing) from an NCCF curve, or (nan, 0) when no peak exists."""
    inner = np.arange(max(min_lag, 1), r.size - 1)
    peaks = inner[(r[inner] > r[inner - 1]) & (r[inner] >= r[inner + 1])]
    if peaks.size == 0:
        return np.nan, 0.0
    best = r[peaks].max()
    if best <= 0:
        return np.nan, 0.0
    lag = int(peaks[np.argmax(r[peaks] >= PEAK_RATIO * best)])

    # parabolic refinement around the integer peak
    left, mid, right = r[lag - 1], r[lag], r[lag + 1]
    curvature = left - 2.0 * mid + right
    offset = 0.5 * (left - right) / curvature if curvature < 0 else 0.0
    return sample_rate / (lag + offset), float(mid)


def kalman_smooth(observations: np.ndarray, obs_var: np.ndarray, prior_mean: float) -> np.ndarray:
    """
    Random-walk Kalman filter plus RTS smoother.

    NaN observations are skipped (prediction only).
    """
    n = observations.size
    q = PROCESS_STD**2
    filt_mean = np.empty(n)
    filt_var = np.empty(n)
    pred_mean = np.empty(n)
    pred_var = np.empty(n)

    mean, var = prior_mean, PRIOR_STD**2
    for t in range(n):
        if t > 0:
            var = var + q
        pred_mean[t], pred_var[t] = mean, var
        obs = observations[t]
        if np.isfinite(obs):
            gain = var / (var + obs_var[t])
            mean = mean + gain * (obs - mean)
            var = (1.0 - gain) * var
        filt_mean[t], filt_var[t] = mean, var

    smoothed = filt_mean.copy()
    for t in range(n - 2, -1, -1):
        back_gain = filt_var[t] / pred_var[t + 1]
        smoothed[t] = filt_mean[t] + back_gain * (smoothed[t + 1] - pred_mean[t + 1])
    return smoothed


def limit_steps(log_f0: np.ndarray, max_step: float = MAX_LOG_STEP) -> np.ndarray:
    out = log_f0.copy()
    for t in range(1, out.size):
        out[t] = np.clip(out[t], out[t - 1] - max_step, out[t - 1] + max_step)
    return out


def track_contf0(wav: Waveform, hop: int = HOP) -> np.ndarray:
    """Per-frame natural-log F0, one value per hop (T = N // hop + 1), always finite."""
    if wav.sample_rate != SAMPLE_RATE:
        raise SignalError(f"Expected {SAMPLE_RATE} Hz audio, got {wav.sample_rate}")
    count = frame_count(len(wav), hop)
    if count == 0:
        raise SignalError("Cannot track pitch of an empty signal", code="empty-signal")

    min_lag, max_lag = _lag_range(wav.sample_rate)
    frames = clamped_frames(wav.samples, FRAME_LENGTH, hop, count)

    observations = np.full(count, np.nan)
    voicing = np.zeros(count)
    for t, frame in enumerate(frames):
        frame = frame - frame.mean()
        if np.sum(frame**2) < SILENCE_ENERGY:
            continue
        f0, score = pick_candidate(nccf(frame, min_lag, max_lag), min_lag, wav.sample_rate)
        if np.isfinite(f0) and score >= VOICING_THRESHOLD:
            observations[t] = np.log(np.clip(f0, F0_MIN, F0_MAX))
            voicing[t] = score

    obs_var = (OBSERVATION_STD / np.maximum(voicing, 1e-3)) ** 2
    prior = np.log(np.sqrt(F0_MIN * F0_MAX))
    voiced = np.isfinite(observations)
    if voiced.any():
        prior = float(np.median(observations[voiced]))

    log_f0 = limit_steps(kalman_smooth(observations, obs_var, prior))
    log_f0 = np.clip(log_f0, np.log(F0_MIN), np.log(F0_MAX))
    logger.info(
        "ContF0: %d frames, %d voiced, median %.1f Hz",
        count, int(voiced.sum()), float(np.exp(np.median(log_f0))),
    )
    return log_f0
