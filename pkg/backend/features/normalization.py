"""Per-dimension zero-mean / unit-variance feature normalization."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Tuple

import numpy as np

from backend.src.core.errors import SignalError
from backend.src.utils.binary_io import read_normalizer_file, write_normalizer_file

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class FeatureNormalizer:
    mean: np.ndarray
    std: np.ndarray
    # indices of dimensions whose std hit the floor
    constant_dims: Tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64).ravel()
        std = np.asarray(self.std, dtype=np.float64).ravel()
        if mean.shape != std.shape:
            raise SignalError("Normalizer mean/std lengths differ")
        if np.any(std <= 0):
            raise SignalError("Normalizer std must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def dims(self) -> int:
        return int(self.mean.size)

    def _check(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.shape[-1] != self.dims:
            raise SignalError(
                f"Feature width {features.shape[-1]} does not match normalizer width {self.dims}"
            )
        return features

    def apply(self, features: np.ndarray) -> np.ndarray:
        return (self._check(features) - self.mean) / self.std

    def invert(self, features: np.ndarray) -> np.ndarray:
        return self._check(features) * self.std + self.mean


def fit_normalizer(matrices: Sequence[np.ndarray]) -> FeatureNormalizer:
    """Fit mean/std over all rows of the training feature matrices."""
    if not len(matrices):
        raise SignalError("No training matrices given to fit_normalizer")
    stacked = np.concatenate([np.atleast_2d(np.asarray(m, dtype=np.float64)) for m in matrices], axis=0)
    if stacked.shape[0] < 2:
        raise SignalError(f"Need at least 2 training frames, got {stacked.shape[0]}")

    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    constant = np.flatnonzero(std < STD_FLOOR)
    if constant.size:
        logger.warning("Constant feature dimensions %s: std floored at %g", constant.tolist(), STD_FLOOR)
    std = np.maximum(std, STD_FLOOR)
    logger.info("Fitted normalizer on %d frames x %d dims", stacked.shape[0], stacked.shape[1])
    return FeatureNormalizer(mean=mean, std=std, constant_dims=tuple(int(i) for i in constant))


def save_normalizer(normalizer: FeatureNormalizer, path: Path | str) -> Path:
    return write_normalizer_file(path, normalizer.mean, normalizer.std)


def load_normalizer(path: Path | str) -> FeatureNormalizer:
    mean, std = read_normalizer_file(path)
    constant = tuple(int(i) for i in np.flatnonzero(std <= STD_FLOOR))
    return FeatureNormalizer(mean=mean, std=std, constant_dims=constant)
