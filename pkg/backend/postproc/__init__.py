from .griffin_lim import GriffinLimResult, griffin_lim, mel_to_magnitude
from .mel_post import (
    VOCODER_HOP,
    SmoothingConfig,
    export_conditioning,
    postprocess_mel,
    resample_hop,
    resample_matrix,
    savgol_smooth,
    smoothing_kernel,
)

__all__ = [
    "VOCODER_HOP",
    "SmoothingConfig",
    "smoothing_kernel",
    "resample_hop",
    "resample_matrix",
    "savgol_smooth",
    "postprocess_mel",
    "export_conditioning",
    "griffin_lim",
    "mel_to_magnitude",
    "GriffinLimResult",
]
