"""
Pipeline configuration.

- One JSON file validated into PipelineConfig (pydantic, frozen)
- Dotted overrides (``train.learning_rate=0.005``) are merged before validation
- Relative paths resolve against the config file's directory
- ``.env`` is loaded with python-dotenv before environment lookups
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Sequence

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from backend.features.spectral import N_MELS, StftConfig
from backend.neural_map.model import CnnArchitecture
from backend.neural_map.training import TrainConfig
from backend.postproc.mel_post import SmoothingConfig
from backend.vocoder.mgc import MgcConfig
from ..utils.data_utils import load_json_file
from .errors import ConfigError, Uti2SpeechError

logger = logging.getLogger(__name__)

JOBS_ENV = "UTI2SPEECH_JOBS"


class PathsConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    corpus_root: Path
    output_root: Path


class SeedConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    split: int = 0
    train: int = 0
    synth: int = 0
    griffin_lim: int = 0


class PipelineConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    paths: PathsConfig
    features: Literal["mel", "contvoc"] = "mel"
    sample_rate: int = 22050
    ultrasound_fps: float = Field(81.67, gt=0)
    split_ratios: tuple[float, float, float] = (0.85, 0.10, 0.05)
    stft: StftConfig = StftConfig()
    mgc: MgcConfig = MgcConfig()
    architecture: CnnArchitecture = CnnArchitecture()
    train: TrainConfig = TrainConfig()
    smoothing: SmoothingConfig = SmoothingConfig()
    seeds: SeedConfig = SeedConfig()
    griffin_lim_iterations: int = Field(60, ge=1)

    @property
    def hop(self) -> int:
        """Audio samples per ultrasound frame."""
        return int(round(self.sample_rate / self.ultrasound_fps))

    @property
    def output_dims(self) -> Dict[str, int]:
        """Network name -> target dimension for the selected feature set."""
        if self.features == "mel":
            return {"mel": N_MELS}
        return {"spectral": self.mgc.order + 1, "excitation": 2}

    def architecture_for(self, dim: int) -> CnnArchitecture:
        return CnnArchitecture(**{**self.architecture.model_dump(), "output_dim": dim})

    @model_validator(mode="after")
    def _check(self) -> "PipelineConfig":
        if self.stft.sample_rate != self.sample_rate or self.mgc.sample_rate != self.sample_rate:
            raise ValueError("stft.sample_rate and mgc.sample_rate must equal sample_rate")
        if self.stft.hop != self.hop or self.mgc.frame_shift != self.hop:
            raise ValueError(
                f"stft.hop ({self.stft.hop}) and mgc.frame_shift ({self.mgc.frame_shift}) "
                f"must equal the ultrasound hop {self.hop}"
            )
        if abs(sum(self.split_ratios) - 1.0) > 1e-9 or min(self.split_ratios) < 0:
            raise ValueError(f"split_ratios must be non-negative and sum to 1, got {self.split_ratios}")
        if not self.paths.corpus_root.is_dir():
            raise ValueError(f"corpus_root does not exist: {self.paths.corpus_root}")
        return self


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Merge ``a.b.c=value`` strings into a nested dict (values parsed as JSON when possible)."""
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"Override must look like key.path=value, got {item!r}", code="invalid-argument")
        node = data
        parts = key.strip().split(".")
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"Override {item!r}: {part} is not a section", code="invalid-argument")
            node = child
        node[parts[-1]] = _parse_value(raw)
    return data


def load_config(path: Path | str, overrides: Sequence[str] = ()) -> PipelineConfig:
    path = Path(path)
    try:
        data = load_json_file(path)
    except Uti2SpeechError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must hold a JSON object")

    data = apply_overrides(data, overrides)
    paths = data.get("paths")
    if isinstance(paths, dict):
        for key in ("corpus_root", "output_root"):
            if key in paths and not Path(paths[key]).is_absolute():
                paths[key] = str((path.parent / paths[key]).resolve())

    try:
        cfg = PipelineConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}: {e}") from e
    logger.info("Loaded config %s (features=%s, hop=%d)", path, cfg.features, cfg.hop)
    return cfg


def default_jobs(env_file: Optional[Path | str] = None) -> int:
    """Job count from UTI2SPEECH_JOBS (after loading .env), defaulting to 1."""
    load_dotenv(env_file, override=False)
    raw = os.environ.get(JOBS_ENV, "1")
    try:
        jobs = int(raw)
    except ValueError:
        raise ConfigError(f"{JOBS_ENV} must be an integer, got {raw!r}", code="invalid-argument") from None
    return max(jobs, 1)
