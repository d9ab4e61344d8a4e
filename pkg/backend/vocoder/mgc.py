"""
Mel-generalized cepstral analysis and its LSP form.

Model (per frame):  H(z) = K * A(z~)^(1/gamma),  A(z~) = 1 + gamma * sum_m c_m z~^-m
with the all-pass warped delay z~^-1 = (z^-1 - alpha) / (1 - alpha z^-1).
gamma = 0 is the mel-cepstral limit, log H(z) = log K + sum_m c_m z~^-m.

Coefficients minimise the unbiased log-spectral criterion
    E(c, K) = mean[ P / |H|^2 - log(P / |H|^2) - 1 ]
over a uniform warped-frequency grid.  K is solved in closed form,
c by damped Newton iterations (analytic gradient and Hessian), with a
backtracking line search that also keeps A(z~) minimum phase.

An MGC vector is laid out as [log K, c_1, ..., c_order].
"""

import logging
from functools import lru_cache
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.signal import get_window

from backend.data_ingestion.audio import HOP, SAMPLE_RATE, Waveform
from backend.src.core.errors import SignalError
from .framing import centered_frames

logger = logging.getLogger(__name__)

SILENCE_ENERGY = 1e-10
GAIN_FLOOR = 0.5 * np.log(SILENCE_ENERGY)
# largest root radius of A(z~) accepted during fitting
STABILITY_RADIUS = 0.995
LSP_GRID_POINTS = 4096
LSP_BISECTIONS = 40


class MgcConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    order: int = 24
    alpha: float = 0.455
    gamma: float = -1.0 / 3.0
    sample_rate: int = SAMPLE_RATE
    frame_shift: int = HOP
    window_length: int = 2 * HOP
    fft_size: int = 1024
    grid_size: int = 512
    max_iterations: int = 30
    tolerance: float = 1e-4

    @model_validator(mode="after")
    def _check(self) -> "MgcConfig":
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.gamma != 0:
            if not -1 < self.gamma < 0:
                raise ValueError(f"gamma must lie in (-1, 0) or be 0, got {self.gamma}")
            stages = 1.0 / abs(self.gamma)
            if abs(stages - round(stages)) > 1e-9:
                raise ValueError(f"1/|gamma| must be an integer, got {stages}")
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.window_length % 2 or self.window_length > self.fft_size:
            raise ValueError("window_length must be even and <= fft_size")
        return self

    @property
    def stages(self) -> int:
        """Number of cascaded all-pole sections (1 / |gamma|)."""
        if self.gamma == 0:
            raise SignalError("gamma = 0 has no cascade form", code="invalid-params")
        return int(round(1.0 / abs(self.gamma)))

    def as_mel_cepstrum(self) -> "MgcConfig":
        return self.model_copy(update={"gamma": 0.0})


# ---------- Frequency warping ----------

def warp_frequency(omega: np.ndarray, alpha: float) -> np.ndarray:
    """Phase response of the first-order all-pass: maps linear to warped frequency."""
    omega = np.asarray(omega, dtype=np.float64)
    return omega + 2.0 * np.arctan(alpha * np.sin(omega) / (1.0 - alpha * np.cos(omega)))


@lru_cache(maxsize=8)
def _warped_grid(grid_size: int, order: int, alpha: float):
    w_tilde = np.linspace(0.0, np.pi, grid_size + 1)
    w_linear = warp_frequency(w_tilde, -alpha)
    weights = np.full(grid_size + 1, 1.0 / grid_size)
    weights[[0, -1]] *= 0.5
    basis = np.exp(-1j * np.outer(w_tilde, np.arange(1, order + 1)))
    basis2 = np.exp(-1j * np.outer(w_tilde, np.arange(0, 2 * order + 1)))
    pair_index = np.add.outer(np.arange(1, order + 1), np.arange(1, order + 1))
    return w_tilde, w_linear, weights, basis, basis2, pair_index


# ---------- Criterion ----------

def frame_periodogram(frame: np.ndarray, cfg: MgcConfig) -> np.ndarray:
    """Windowed power spectrum normalised so that its mean equals the frame power."""
    window = get_window("hann", cfg.window_length)
    spec = np.fft.rfft(frame * window, cfg.fft_size)
    return np.abs(spec) ** 2 / np.sum(window**2)


def _log_model(c: np.ndarray, basis: np.ndarray, gamma: float):
    """Return (L, A) with L = log |A(e^jw~)|^(2/gamma) (or 2 Re C for gamma = 0)."""
    cep = basis @ c
    if gamma == 0:
        return 2.0 * cep.real, None
    a = 1.0 + gamma * cep
    return np.log(np.abs(a) ** 2) / gamma, a


class _FrameFit:
    """Criterion, gradient and Hessian for one frame on the warped grid."""

    def __init__(self, periodogram: np.ndarray, cfg: MgcConfig) -> None:
        self.cfg = cfg
        self.gamma = cfg.gamma
        (self.w_tilde, w_linear, self.u, self.basis,
         self.basis2, self.pair) = _warped_grid(cfg.grid_size, cfg.order, cfg.alpha)

        bins = np.linspace(0.0, np.pi, periodogram.size)
        floor = max(periodogram.max(), 1e-300) * 1e-12
        log_p = np.log(np.maximum(periodogram, floor))
        self.p = np.exp(np.interp(w_linear, bins, log_p))
        self.mean_log_p = self.u @ np.log(self.p)

    def value(self, c: np.ndarray) -> Tuple[float, float]:
        """(criterion, optimal log K) for shape coefficients c."""
        log_model, _ = _log_model(c, self.basis, self.gamma)
        q = self.p * np.exp(-log_model)
        total = self.u @ q
        crit = np.log(total) + self.u @ log_model - self.mean_log_p
        return float(crit), 0.5 * float(np.log(total))

    def newton_direction(self, c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        log_model, a = _log_model(c, self.basis, self.gamma)
        q = self.p * np.exp(-log_model)
        wq = self.u * q / (self.u @ q)

        if a is None:
            grads = 2.0 * self.basis.real
        else:
            grads = 2.0 * (self.basis / a[:, None]).real

        mean_q = wq @ grads
        mean_u = self.u @ grads
        gradient = mean_u - mean_q
        hessian = (grads * wq[:, None]).T @ grads - np.outer(mean_q, mean_q)

        if a is not None:
            curv = self.basis2 / (a**2)[:, None]
            h_q = -2.0 * self.gamma * (wq @ curv).real
            h_u = -2.0 * self.gamma * (self.u @ curv).real
            hessian = hessian - h_q[self.pair] + h_u[self.pair]

        # modified Newton: clip the spectrum of the Hessian to stay positive definite
        eigval, eigvec = np.linalg.eigh(0.5 * (hessian + hessian.T))
        eigval = np.maximum(eigval, 1e-8 * max(1.0, float(np.abs(eigval).max())))
        step = -eigvec @ ((eigvec.T @ gradient) / eigval)
        return step, gradient


def is_minimum_phase(c: np.ndarray, gamma: float, radius: float = 1.0) -> bool:
    if gamma == 0:
        return True
    poly = np.concatenate(([1.0], gamma * np.asarray(c, dtype=np.float64)))
    roots = np.roots(poly)
    return bool(roots.size == 0 or np.max(np.abs(roots)) < radius)


def fit_mgc_frame(frame: np.ndarray, cfg: MgcConfig) -> np.ndarray:
    """MGC vector [log K, c_1..c_order] for one analysis frame."""
    periodogram = frame_periodogram(frame, cfg)
    energy = float(np.sum((frame * get_window("hann", cfg.window_length)) ** 2))
    if energy < SILENCE_ENERGY:
        out = np.zeros(cfg.order + 1)
        out[0] = GAIN_FLOOR
        return out

    fit = _FrameFit(periodogram, cfg)
    c = np.zeros(cfg.order)
    crit, log_gain = fit.value(c)

    for _ in range(cfg.max_iterations):
        step, gradient = fit.newton_direction(c)
        if gradient @ step >= 0:
            step = -gradient

        accepted = False
        t = 1.0
        for _ in range(30):
            trial = c + t * step
            if is_minimum_phase(trial, cfg.gamma, STABILITY_RADIUS):
                trial_crit, trial_gain = fit.value(trial)
                if trial_crit <= crit:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            break

        change = abs(crit - trial_crit) / max(abs(trial_crit), 1e-12)
        c, crit, log_gain = trial, trial_crit, trial_gain
        if change < cfg.tolerance:
            break

    return np.concatenate(([log_gain], c))


def mgc_criterion(mgc: np.ndarray, frame: np.ndarray, cfg: MgcConfig) -> float:
    """Criterion value of the shape coefficients mgc[1:] for an analysis frame."""
    fit = _FrameFit(frame_periodogram(frame, cfg), cfg)
    return fit.value(np.asarray(mgc, dtype=np.float64)[1:])[0]


def analysis_frames(wav: Waveform, cfg: MgcConfig) -> np.ndarray:
    if wav.sample_rate != cfg.sample_rate:
        raise SignalError(f"Expected {cfg.sample_rate} Hz audio, got {wav.sample_rate}")
    if len(wav) < 1:
        raise SignalError("Cannot analyse an empty signal", code="empty-signal")
    return centered_frames(wav.samples, cfg.window_length, cfg.frame_shift)


def analyze_mgc(wav: Waveform, cfg: MgcConfig = MgcConfig()) -> np.ndarray:
    """Per-frame MGC coefficients, shape (T, order + 1), T = N // frame_shift + 1."""
    frames = analysis_frames(wav, cfg)
    out = np.stack([fit_mgc_frame(frame, cfg) for frame in frames])
    silent = int(np.sum(out[:, 0] == GAIN_FLOOR))
    if silent:
        logger.warning("%d of %d frames below the silence threshold, gain floored", silent, out.shape[0])
    logger.info(
        "MGC analysis: %d frames, order %d, alpha %.3f, gamma %.3f",
        out.shape[0], cfg.order, cfg.alpha, cfg.gamma,
    )
    return out


def mgc_log_spectrum(mgc: np.ndarray, cfg: MgcConfig, n_bins: int = 513) -> np.ndarray:
    """Natural-log power spectrum of the model on a linear 0..pi grid."""
    mgc = np.asarray(mgc, dtype=np.float64)
    omega = np.linspace(0.0, np.pi, n_bins)
    w_tilde = warp_frequency(omega, cfg.alpha)
    basis = np.exp(-1j * np.outer(w_tilde, np.arange(1, cfg.order + 1)))
    log_model, _ = _log_model(mgc[1:], basis, cfg.gamma)
    return 2.0 * mgc[0] + log_model


# ---------- LSP form ----------

def _lsp_functions(poly: np.ndarray, omega: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Real-valued sum/difference polynomial evaluations on the unit circle."""
    order = poly.size - 1
    powers = np.arange(order + 1)
    value = np.exp(0.5j * (order + 1) * omega) * (np.exp(-1j * np.outer(omega, powers)) @ poly)
    return value.real, value.imag


def _bisect_roots(poly: np.ndarray, lo: np.ndarray, hi: np.ndarray, use_real: bool) -> np.ndarray:
    pick = 0 if use_real else 1
    f_lo = _lsp_functions(poly, lo)[pick]
    for _ in range(LSP_BISECTIONS):
        mid = 0.5 * (lo + hi)
        f_mid = _lsp_functions(poly, mid)[pick]
        same = np.sign(f_mid) == np.sign(f_lo)
        lo = np.where(same, mid, lo)
        f_lo = np.where(same, f_mid, f_lo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def mgc_to_lsp(mgc: np.ndarray, cfg: MgcConfig = MgcConfig()) -> Tuple[float, np.ndarray]:
    """
    Convert one MGC frame to (gain, lsp).

    The LSPs are the unit-circle roots of A(z) +/- z^-(p+1) A(1/z), found by a
    dense grid scan over (0, pi) and refined by bisection.
    """
    if cfg.gamma == 0:
        raise SignalError("LSP form needs gamma < 0", code="invalid-params")
    mgc = np.asarray(mgc, dtype=np.float64)
    poly = np.concatenate(([1.0], cfg.gamma * mgc[1:]))

    grid = np.linspace(0.0, np.pi, LSP_GRID_POINTS + 1)[1:-1]
    f_sum, f_diff = _lsp_functions(poly, grid)

    found, labels = [], []
    for values, use_real in ((f_sum, True), (f_diff, False)):
        change = np.flatnonzero(np.signbit(values[:-1]) != np.signbit(values[1:]))
        if change.size:
            found.append(_bisect_roots(poly, grid[change], grid[change + 1], use_real))
            labels.append(np.full(change.size, 0 if use_real else 1))
    if not found:
        raise SignalError("No line spectral frequencies found", code="unstable-frame")
    lsp = np.concatenate(found)
    order = np.argsort(lsp, kind="stable")
    lsp, kinds = lsp[order], np.concatenate(labels)[order]

    if lsp.size != cfg.order:
        raise SignalError(
            f"Found {lsp.size} line spectral frequencies, expected {cfg.order}",
            code="unstable-frame",
        )
    # sum and difference roots must alternate, starting with the sum polynomial
    if np.any(kinds != np.arange(cfg.order) % 2) or np.any(np.diff(lsp) <= 0):
        raise SignalError("Line spectral frequencies do not interlace", code="unstable-frame")
    return float(mgc[0]), lsp


def lsp_to_mgc(lsp: np.ndarray, gain: float, cfg: MgcConfig = MgcConfig()) -> np.ndarray:
    """Rebuild [gain, c_1..c_order] from ascending LSPs (first root belongs to the sum polynomial)."""
    if cfg.gamma == 0:
        raise SignalError("LSP form needs gamma < 0", code="invalid-params")
    lsp = np.asarray(lsp, dtype=np.float64)
    if lsp.size != cfg.order:
        raise SignalError(f"Expected {cfg.order} LSPs, got {lsp.size}", code="invalid-params")

    def expand(freqs: np.ndarray, extra: np.ndarray) -> np.ndarray:
        poly = extra
        for w in freqs:
            poly = np.convolve(poly, [1.0, -2.0 * np.cos(w), 1.0])
        return poly

    if cfg.order % 2 == 0:
        p_poly = expand(lsp[0::2], np.array([1.0, 1.0]))
        q_poly = expand(lsp[1::2], np.array([1.0, -1.0]))
    else:
        p_poly = expand(lsp[0::2], np.array([1.0]))
        q_poly = expand(lsp[1::2], np.array([1.0, 0.0, -1.0]))

    a = 0.5 * (p_poly + q_poly)[: cfg.order + 1]
    return np.concatenate(([gain], a[1:] / cfg.gamma))
