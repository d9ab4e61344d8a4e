"""
Continuous vocoder parameters (ContParams) and their CVP1 file form.

One record per 270-sample frame: [gain, lsp * order, log_f0, log_mvf].
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np

from backend.data_ingestion.audio import HOP, Waveform
from backend.src.core.errors import SignalError
from backend.src.utils.binary_io import read_cvp_file, write_cvp_file
from .mgc import MgcConfig, analyze_mgc, mgc_to_lsp
from .mvf import MVF_MAX, MVF_MIN, estimate_mvf
from .pitch import F0_MAX, F0_MIN, track_contf0

logger = logging.getLogger(__name__)

# float32 storage rounds log values; accept that much slack when checking ranges
RANGE_TOLERANCE = 1e-4
MIN_LSP_GAP = 1e-3


@dataclass(frozen=True)
class ContParams:
    gain: np.ndarray  # (T,)
    lsp: np.ndarray  # (T, order)
    log_f0: np.ndarray  # (T,)
    log_mvf: np.ndarray  # (T,)
    hop: int = HOP

    def __post_init__(self) -> None:
        for name in ("gain", "lsp", "log_f0", "log_mvf"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        frames = self.gain.shape[0] if self.gain.ndim == 1 else -1
        if (
            frames < 0
            or self.lsp.ndim != 2
            or self.lsp.shape[0] != frames
            or self.log_f0.shape != (frames,)
            or self.log_mvf.shape != (frames,)
        ):
            raise SignalError(
                "ContParams arrays disagree in shape: "
                f"gain {self.gain.shape}, lsp {self.lsp.shape}, "
                f"log_f0 {self.log_f0.shape}, log_mvf {self.log_mvf.shape}",
                code="invalid-params",
            )

    @property
    def frame_count(self) -> int:
        return int(self.gain.shape[0])

    @property
    def order(self) -> int:
        return int(self.lsp.shape[1])

    def violations(self) -> List[str]:
        """Human-readable list of broken invariants (empty when valid)."""
        problems = []
        arrays = (self.gain, self.lsp, self.log_f0, self.log_mvf)
        if not all(np.all(np.isfinite(a)) for a in arrays):
            problems.append("non-finite values")
            return problems
        if self.frame_count and self.order:
            if np.any(self.lsp <= 0) or np.any(self.lsp >= np.pi):
                problems.append("lsp outside (0, pi)")
            if np.any(np.diff(self.lsp, axis=1) <= 0):
                problems.append("lsp not strictly ascending")
        tol = RANGE_TOLERANCE
        if np.any(self.log_f0 < np.log(F0_MIN) - tol) or np.any(self.log_f0 > np.log(F0_MAX) + tol):
            problems.append(f"f0 outside [{F0_MIN:g}, {F0_MAX:g}] Hz")
        if np.any(self.log_mvf < np.log(MVF_MIN) - tol) or np.any(self.log_mvf > np.log(MVF_MAX) + tol):
            problems.append(f"mvf outside [{MVF_MIN:g}, {MVF_MAX:g}] Hz")
        return problems

    def validate(self) -> "ContParams":
        problems = self.violations()
        if problems:
            raise SignalError("Invalid vocoder parameters: " + "; ".join(problems), code="invalid-params")
        return self

    def to_records(self) -> np.ndarray:
        return np.column_stack([self.gain, self.lsp, self.log_f0, self.log_mvf])

    @classmethod
    def from_records(cls, records: np.ndarray, order: int, hop: int = HOP) -> "ContParams":
        records = np.asarray(records, dtype=np.float64)
        if records.ndim != 2 or records.shape[1] != order + 3:
            raise SignalError(
                f"Expected (T, {order + 3}) parameter records, got {records.shape}",
                code="invalid-params",
            )
        return cls(
            gain=records[:, 0],
            lsp=records[:, 1 : order + 1],
            log_f0=records[:, order + 1],
            log_mvf=records[:, order + 2],
            hop=hop,
        )

    @classmethod
    def repaired(cls, records: np.ndarray, order: int) -> "ContParams":
        """
        Coerce predicted records into valid parameters: sort LSPs, keep a
        minimum gap inside (0, pi) and clamp F0 and MVF to their ranges.
        """
        records = np.array(records, dtype=np.float64)
        original = records.copy()
        lsp = np.sort(records[:, 1 : order + 1], axis=1)
        lo, hi = MIN_LSP_GAP, np.pi - MIN_LSP_GAP
        lsp = np.clip(lsp, lo, hi)
        for i in range(1, order):
            lsp[:, i] = np.maximum(lsp[:, i], lsp[:, i - 1] + MIN_LSP_GAP)
        for i in range(order - 2, -1, -1):
            lsp[:, i] = np.minimum(lsp[:, i], lsp[:, i + 1] - MIN_LSP_GAP)
        records[:, 1 : order + 1] = lsp
        records[:, order + 1] = np.clip(records[:, order + 1], np.log(F0_MIN), np.log(F0_MAX))
        records[:, order + 2] = np.clip(records[:, order + 2], np.log(MVF_MIN), np.log(MVF_MAX))
        changed = int(np.count_nonzero(np.any(records != original, axis=1)))
        if changed:
            logger.warning(
                "Clamped %d of %d predicted frames into the valid parameter ranges", changed, records.shape[0]
            )
        return cls.from_records(records, order)


def analyze_contparams(wav: Waveform, cfg: MgcConfig = MgcConfig()) -> ContParams:
    """Full analysis: MGC-LSP, continuous F0 and MVF for every frame."""
    mgc = analyze_mgc(wav, cfg)
    gains = np.empty(mgc.shape[0])
    lsp = np.empty((mgc.shape[0], cfg.order))
    for t, frame in enumerate(mgc):
        try:
            gains[t], lsp[t] = mgc_to_lsp(frame, cfg)
        except SignalError as e:
            raise SignalError(f"Frame {t}: {e}", code=e.code) from e

    log_f0 = track_contf0(wav, cfg.frame_shift)
    log_mvf = estimate_mvf(wav, log_f0, cfg.frame_shift)
    return ContParams(gain=gains, lsp=lsp, log_f0=log_f0, log_mvf=log_mvf, hop=cfg.frame_shift)


def save_contparams(params: ContParams, path: Path | str) -> Path:
    return write_cvp_file(path, params.to_records(), params.order)


def load_contparams(path: Path | str) -> ContParams:
    records, order = read_cvp_file(path)
    return ContParams.from_records(records, order)
