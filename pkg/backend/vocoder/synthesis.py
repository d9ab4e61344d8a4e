"""
Continuous vocoder synthesis.

- Pitch marks come from integrating the per-sample F0 (one mark per phase wrap)
- Each mark receives a two-period, Hann-windowed residual prototype resampled
  to the local period; pulses are overlap-added
- Per frame, the voiced excitation is lowpassed and white noise highpassed at
  the MVF (linear-phase FIR, applied zero-phase) and the two are summed
- The gained excitation runs through the MGLSA filter: 1/|gamma| cascaded
  sections 1 / A(z~), each realised as an IIR in z with carried state
"""

import logging
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.signal import firwin, get_window, lfilter, resample

from backend.data_ingestion.audio import SAMPLE_RATE, Waveform
from backend.src.core.errors import SignalError
from .mgc import MgcConfig, lsp_to_mgc
from .params import ContParams

logger = logging.getLogger(__name__)

PROTOTYPE_PERIOD = 128
PROTOTYPE_BANDWIDTH = 0.9
FIR_TAPS = 101


# ---------- Excitation ----------

@lru_cache(maxsize=1)
def residual_prototype() -> np.ndarray:
    """Two-period impulse-like residual: a Hann-windowed sinc centred in the frame."""
    n = np.arange(2 * PROTOTYPE_PERIOD) - PROTOTYPE_PERIOD
    return np.sinc(PROTOTYPE_BANDWIDTH * n) * get_window("hann", 2 * PROTOTYPE_PERIOD)


@lru_cache(maxsize=512)
def pitch_pulse(period: int) -> np.ndarray:
    """Prototype resampled to 2 * period samples, scaled to energy `period`."""
    pulse = resample(residual_prototype(), 2 * period) * get_window("hann", 2 * period)
    energy = float(np.sum(pulse**2))
    pulse = pulse * np.sqrt(period / energy)
    pulse.setflags(write=False)
    return pulse


def sample_f0(log_f0: np.ndarray, hop: int, constant_f0: Optional[float] = None) -> np.ndarray:
    """Per-sample F0 interpolated between frame centres t * hop."""
    total = log_f0.size * hop
    if constant_f0 is not None:
        return np.full(total, float(constant_f0))
    centres = np.arange(log_f0.size) * hop
    return np.interp(np.arange(total), centres, np.exp(log_f0))


def pitch_marks(f0: np.ndarray, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Sample indices where the integrated F0 phase wraps; the first mark is sample 0."""
    if f0.size == 0:
        return np.empty(0, dtype=int)
    cycles = np.cumsum(f0 / sample_rate) - f0[0] / sample_rate
    wraps = np.floor(cycles).astype(np.int64)
    return np.flatnonzero(np.diff(wraps, prepend=-1) > 0)


def voiced_excitation(f0: np.ndarray, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    out = np.zeros(f0.size)
    for mark in pitch_marks(f0, sample_rate):
        period = max(int(round(sample_rate / f0[mark])), 2)
        pulse = pitch_pulse(period)
        start = mark - period
        lo, hi = max(start, 0), min(start + pulse.size, out.size)
        if lo < hi:
            out[lo:hi] += pulse[lo - start : hi - start]
    return out


@lru_cache(maxsize=2048)
def _lowpass(cutoff_hz: float, sample_rate: int) -> np.ndarray:
    nyquist = sample_rate / 2.0
    if cutoff_hz >= 0.99 * nyquist:
        taps = np.zeros(FIR_TAPS)
        taps[FIR_TAPS // 2] = 1.0
        return taps
    return firwin(FIR_TAPS, cutoff_hz, fs=sample_rate)


def _filter_segment(signal: np.ndarray, taps: np.ndarray, start: int, stop: int) -> np.ndarray:
    """Zero-phase FIR output for signal[start:stop] (linear-phase taps, centred)."""
    half = taps.size // 2
    lo, hi = start - half, stop + half
    pad_lo, pad_hi = max(0, -lo), max(0, hi - signal.size)
    chunk = signal[max(lo, 0) : min(hi, signal.size)]
    chunk = np.pad(chunk, (pad_lo, pad_hi))
    return np.convolve(chunk, taps, mode="valid")


def mixed_excitation(
    voiced: np.ndarray,
    noise: np.ndarray,
    log_mvf: np.ndarray,
    hop: int,
    sample_rate: int = SAMPLE_RATE,
) -> np.ndarray:
    out = np.empty(voiced.size)
    for t, lmvf in enumerate(log_mvf):
        start, stop = t * hop, (t + 1) * hop
        lowpass = _lowpass(round(float(np.exp(lmvf)), 1), sample_rate)
        highpass = -lowpass
        highpass[FIR_TAPS // 2] += 1.0
        out[start:stop] = _filter_segment(voiced, lowpass, start, stop) + _filter_segment(
            noise, highpass, start, stop
        )
    return out


# ---------- MGLSA filter ----------

def _poly_power(base: np.ndarray, n: int) -> np.ndarray:
    out = np.array([1.0])
    for _ in range(n):
        out = np.convolve(out, base)
    return out


@lru_cache(maxsize=8)
def warped_basis(order: int, alpha: float) -> tuple:
    """
    Rows m = 0..order: coefficients (in z^-1) of (z^-1 - alpha)^m (1 - alpha z^-1)^(order - m),
    plus the common numerator (1 - alpha z^-1)^order.
    """
    delay = np.array([-alpha, 1.0])
    damp = np.array([1.0, -alpha])
    rows = np.stack([
        np.convolve(_poly_power(delay, m), _poly_power(damp, order - m)) for m in range(order + 1)
    ])
    return rows, _poly_power(damp, order)


def mglsa_filter(excitation: np.ndarray, mgc: np.ndarray, hop: int, cfg: MgcConfig) -> np.ndarray:
    """Frame-wise time-varying MGLSA synthesis: gain times a cascade of 1 / A(z~)."""
    rows, numerator = warped_basis(cfg.order, cfg.alpha)
    stages = cfg.stages
    states = [np.zeros(cfg.order) for _ in range(stages)]
    out = np.empty(excitation.size)
    for t, frame in enumerate(mgc):
        start, stop = t * hop, (t + 1) * hop
        a = np.concatenate(([1.0], cfg.gamma * frame[1:]))
        denominator = a @ rows
        segment = excitation[start:stop] * np.exp(frame[0])
        for s in range(stages):
            segment, states[s] = lfilter(numerator, denominator, segment, zi=states[s])
        out[start:stop] = segment
    return out


# ---------- Entry point ----------

def synthesize(
    params: ContParams,
    cfg: MgcConfig = MgcConfig(),
    seed: int = 0,
    constant_f0: Optional[float] = None,
) -> Waveform:
    """
    Render a waveform of exactly frame_count * hop samples.

    `constant_f0` replaces the F0 contour (monotone anchor rendering).
    The noise branch is seeded, so output is deterministic.
    """
    params.validate()
    if params.order != cfg.order:
        raise SignalError(
            f"Parameters have order {params.order}, vocoder expects {cfg.order}",
            code="invalid-params",
        )
    if params.hop != cfg.frame_shift:
        raise SignalError(f"Parameter hop {params.hop} != vocoder hop {cfg.frame_shift}", code="invalid-params")
    if constant_f0 is not None and not (np.isfinite(constant_f0) and constant_f0 > 0):
        raise SignalError(f"Constant F0 must be positive, got {constant_f0}", code="invalid-params")

    hop = params.hop
    mgc = np.stack([lsp_to_mgc(lsp, g, cfg) for g, lsp in zip(params.gain, params.lsp)]) \
        if params.frame_count else np.empty((0, cfg.order + 1))

    f0 = sample_f0(params.log_f0, hop, constant_f0)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(f0.size)
    voiced = voiced_excitation(f0, cfg.sample_rate)
    excitation = mixed_excitation(voiced, noise, params.log_mvf, hop, cfg.sample_rate)
    samples = mglsa_filter(excitation, mgc, hop, cfg)

    logger.info("Synthesized %d frames -> %d samples (seed=%d)", params.frame_count, samples.size, seed)
    return Waveform(samples=samples, sample_rate=cfg.sample_rate)
