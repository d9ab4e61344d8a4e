from .normalization import FeatureNormalizer, fit_normalizer, load_normalizer, save_normalizer
from .spectral import (
    MelConfig,
    MelFilterbank,
    MelSpectrogram,
    StftConfig,
    build_mel_filterbank,
    load_mel,
    mel_spectrogram,
    save_mel,
    stft,
)

__all__ = [
    "FeatureNormalizer",
    "fit_normalizer",
    "load_normalizer",
    "save_normalizer",
    "MelConfig",
    "MelFilterbank",
    "MelSpectrogram",
    "StftConfig",
    "build_mel_filterbank",
    "load_mel",
    "mel_spectrogram",
    "save_mel",
    "stft",
]
