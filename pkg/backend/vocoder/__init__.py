from .mgc import MgcConfig, analyze_mgc, lsp_to_mgc, mgc_criterion, mgc_log_spectrum, mgc_to_lsp
from .mvf import estimate_mvf
from .params import ContParams, analyze_contparams, load_contparams, save_contparams
from .pitch import track_contf0
from .synthesis import synthesize

__all__ = [
    "MgcConfig",
    "analyze_mgc",
    "mgc_criterion",
    "mgc_log_spectrum",
    "mgc_to_lsp",
    "lsp_to_mgc",
    "track_contf0",
    "estimate_mvf",
    "ContParams",
    "analyze_contparams",
    "load_contparams",
    "save_contparams",
    "synthesize",
]
