# ultrasound.py

"""
Ultrasound container IO and frame resizing.

Container layout:
- <utt>.bin  : raw concatenated uint8 frames, frame-major, each frame
               NumVectors x PixPerVector (scanline-major)
- <utt>.meta : key=value text sidecar; required keys NumVectors,
               PixPerVector, FramesPerSec (other keys are kept verbatim)

Frames are resized to the CNN input grid (64 x 128 by default) with
separable Keys cubic convolution and scaled to [0, 1].
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from backend.src.core.errors import FormatError, SignalError
from backend.src.utils.interpolation import cubic_weight_matrix, half_pixel_positions

logger = logging.getLogger(__name__)

REQUIRED_META_KEYS = ("NumVectors", "PixPerVector", "FramesPerSec")
IMAGE_HEIGHT = 64
IMAGE_WIDTH = 128
MIN_SOURCE_SIZE = 4


@dataclass(frozen=True)
class UltrasoundSequence:
    frames: np.ndarray  # (T, num_vectors, pix_per_vector) uint8
    fps: float
    metadata: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames)
        if frames.ndim != 3:
            raise SignalError(f"Ultrasound frames must be 3-D, got shape {frames.shape}")
        if frames.dtype != np.uint8:
            raise SignalError(f"Ultrasound frames must be uint8, got {frames.dtype}")
        if frames.shape[0] < 1:
            raise SignalError("Ultrasound sequence needs at least one frame")
        if not self.fps > 0:
            raise SignalError(f"Frame rate must be positive, got {self.fps}")
        object.__setattr__(self, "frames", frames)

    @property
    def frame_count(self) -> int:
        return int(self.frames.shape[0])

    @property
    def num_vectors(self) -> int:
        return int(self.frames.shape[1])

    @property
    def pix_per_vector(self) -> int:
        return int(self.frames.shape[2])

    def truncated(self, frame_count: int) -> "UltrasoundSequence":
        return UltrasoundSequence(self.frames[:frame_count], self.fps, dict(self.metadata))


@dataclass(frozen=True)
class ResizedFrame:
    pixels: np.ndarray  # (height, width) float in [0, 1]

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2:
            raise SignalError(f"Resized frame must be 2-D, got shape {pixels.shape}")
        if pixels.size and (pixels.min() < 0.0 or pixels.max() > 1.0):
            raise SignalError("Resized frame values must lie in [0, 1]")


# ---------- Metadata sidecar ----------

def default_meta_path(container_path: Path | str) -> Path:
    return Path(container_path).with_suffix(".meta")


def parse_metadata(text: str) -> Dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    meta: Dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"Metadata line without '=': {line!r}", code="invalid-metadata")
        key, value = line.split("=", 1)
        meta[key.strip()] = value.strip()
    return meta


def _meta_number(meta: Dict[str, str], key: str, kind: type) -> float | int:
    if key not in meta:
        raise FormatError(f"Missing metadata key: {key}", code="invalid-metadata")
    try:
        value = kind(meta[key])
    except ValueError as e:
        raise FormatError(f"Metadata key {key} is not a number: {meta[key]!r}", code="invalid-metadata") from e
    if value <= 0:
        raise FormatError(f"Metadata key {key} must be positive, got {value}", code="invalid-metadata")
    return value


# ---------- Container IO ----------

def read_ultrasound(
    container_path: Path | str,
    meta_path: Optional[Path | str] = None,
) -> UltrasoundSequence:
    container_path = Path(container_path)
    meta_path = Path(meta_path) if meta_path is not None else default_meta_path(container_path)

    if not meta_path.exists():
        raise FormatError(f"Metadata sidecar not found: {meta_path}", code="invalid-metadata")
    if not container_path.exists():
        raise FormatError(f"Ultrasound container not found: {container_path}", code="stage-dependency")

    meta = parse_metadata(meta_path.read_text(encoding="utf-8"))
    num_vectors = int(_meta_number(meta, "NumVectors", int))
    pix_per_vector = int(_meta_number(meta, "PixPerVector", int))
    fps = float(_meta_number(meta, "FramesPerSec", float))

    raw = np.fromfile(container_path, dtype=np.uint8)
    frame_bytes = num_vectors * pix_per_vector
    if raw.size == 0 or raw.size % frame_bytes != 0:
        raise FormatError(
            f"{container_path}: {raw.size} bytes is not a whole number of "
            f"{num_vectors}x{pix_per_vector} frames",
            code="malformed-container",
        )

    frames = raw.reshape(-1, num_vectors, pix_per_vector)
    logger.info(
        "Loaded %d ultrasound frames (%dx%d @ %.2f fps) from %s",
        frames.shape[0], num_vectors, pix_per_vector, fps, container_path,
    )
    return UltrasoundSequence(frames=frames, fps=fps, metadata=meta)


def write_ultrasound(
    seq: UltrasoundSequence,
    container_path: Path | str,
    meta_path: Optional[Path | str] = None,
) -> Path:
    container_path = Path(container_path)
    meta_path = Path(meta_path) if meta_path is not None else default_meta_path(container_path)
    container_path.parent.mkdir(parents=True, exist_ok=True)

    meta = dict(seq.metadata)
    meta["NumVectors"] = str(seq.num_vectors)
    meta["PixPerVector"] = str(seq.pix_per_vector)
    meta["FramesPerSec"] = repr(float(seq.fps))

    np.ascontiguousarray(seq.frames, dtype=np.uint8).tofile(container_path)
    meta_path.write_text("".join(f"{k}={v}\n" for k, v in meta.items()), encoding="utf-8")
    return container_path


# ---------- Bicubic resizing ----------

def _resize_matrices(src_h: int, src_w: int, height: int, width: int):
    if src_h < MIN_SOURCE_SIZE or src_w < MIN_SOURCE_SIZE:
        raise SignalError(
            f"Source frame {src_h}x{src_w} is smaller than {MIN_SOURCE_SIZE}x{MIN_SOURCE_SIZE}",
            code="too-small-input",
        )
    rows = cubic_weight_matrix(half_pixel_positions(src_h, height), src_h)
    cols = cubic_weight_matrix(half_pixel_positions(src_w, width), src_w)
    return rows, cols


def resize_bicubic(
    frame: np.ndarray,
    height: int = IMAGE_HEIGHT,
    width: int = IMAGE_WIDTH,
    clamp: bool = True,
) -> ResizedFrame | np.ndarray:
    """
    Resize one num_vectors x pix_per_vector frame to height x width.

    Intensities are scaled by 1/255. With ``clamp=False`` the raw float
    array is returned (no [0, 1] clamping, no ResizedFrame wrapper).
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2:
        raise SignalError(f"Expected a 2-D frame, got shape {frame.shape}")
    rows, cols = _resize_matrices(frame.shape[0], frame.shape[1], height, width)
    out = rows @ frame @ cols.T / 255.0
    if not clamp:
        return out
    return ResizedFrame(np.clip(out, 0.0, 1.0))


def resize_sequence(
    seq: UltrasoundSequence,
    height: int = IMAGE_HEIGHT,
    width: int = IMAGE_WIDTH,
) -> np.ndarray:
    """Resize every frame; returns (T, height, width) float32 in [0, 1]."""
    rows, cols = _resize_matrices(seq.num_vectors, seq.pix_per_vector, height, width)
    frames = seq.frames.astype(np.float64)
    out = np.einsum("hv,tvp,wp->thw", rows, frames, cols, optimize=True) / 255.0
    return np.clip(out, 0.0, 1.0).astype(np.float32)
