"""
Versioned little-endian feature files.

- MEL1: magic, T, dims, hop, sample_rate (int32) + T*dims float32, row-major
- NRM1: magic, dims (int32) + mean[dims], std[dims] (float64)
- CVP1: magic, T, order (int32) + T records of (order + 3) float32:
        [gain, lsp * order, log_f0, log_mvf]

Readers validate the magic and the payload size before touching the data,
so a dimension mismatch is caught at load time.
"""

import logging
import struct
from pathlib import Path
from typing import Tuple

import numpy as np

from ..core.errors import FormatError

logger = logging.getLogger(__name__)

MEL_MAGIC = b"MEL1"
NRM_MAGIC = b"NRM1"
CVP_MAGIC = b"CVP1"

_F32 = np.dtype("<f4")
_F64 = np.dtype("<f8")


def _read_bytes(path: Path | str) -> bytes:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"File not found: {path}", code="stage-dependency")
    return path.read_bytes()


def _check_magic(blob: bytes, magic: bytes, path: Path | str) -> None:
    if blob[:4] != magic:
        raise FormatError(
            f"{path}: expected magic {magic!r}, found {blob[:4]!r}",
            code="corrupt-file",
        )


def _write_atomic(path: Path | str, payload: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(payload)
    tmp.replace(path)
    return path


# ---------- MEL1 ----------

def write_mel_file(path: Path | str, values: np.ndarray, hop: int, sample_rate: int) -> Path:
    values = np.asarray(values)
    if values.ndim != 2:
        raise FormatError(f"MEL1 payload must be 2-D, got shape {values.shape}", code="invalid-input")
    frames, dims = values.shape
    header = MEL_MAGIC + struct.pack("<4i", frames, dims, int(hop), int(sample_rate))
    body = np.ascontiguousarray(values, dtype=_F32).tobytes()
    out = _write_atomic(path, header + body)
    logger.debug("Wrote MEL1 %dx%d hop=%d -> %s", frames, dims, hop, out)
    return out


def read_mel_file(path: Path | str) -> Tuple[np.ndarray, int, int]:
    """Return (values[T, dims] float32, hop, sample_rate)."""
    blob = _read_bytes(path)
    if len(blob) < 20:
        raise FormatError(f"{path}: truncated MEL1 header")
    _check_magic(blob, MEL_MAGIC, path)
    frames, dims, hop, sample_rate = struct.unpack("<4i", blob[4:20])
    expected = 20 + frames * dims * _F32.itemsize
    if frames < 0 or dims <= 0 or len(blob) != expected:
        raise FormatError(
            f"{path}: MEL1 size mismatch (header says {frames}x{dims}, "
            f"{len(blob)} bytes on disk, expected {expected})"
        )
    values = np.frombuffer(blob, dtype=_F32, offset=20).reshape(frames, dims).copy()
    return values, hop, sample_rate


# ---------- NRM1 ----------

def write_normalizer_file(path: Path | str, mean: np.ndarray, std: np.ndarray) -> Path:
    mean = np.asarray(mean, dtype=_F64).ravel()
    std = np.asarray(std, dtype=_F64).ravel()
    if mean.shape != std.shape:
        raise FormatError("NRM1 mean/std length mismatch", code="invalid-input")
    header = NRM_MAGIC + struct.pack("<i", mean.size)
    return _write_atomic(path, header + mean.tobytes() + std.tobytes())


def read_normalizer_file(path: Path | str) -> Tuple[np.ndarray, np.ndarray]:
    blob = _read_bytes(path)
    if len(blob) < 8:
        raise FormatError(f"{path}: truncated NRM1 header")
    _check_magic(blob, NRM_MAGIC, path)
    (dims,) = struct.unpack("<i", blob[4:8])
    expected = 8 + 2 * dims * _F64.itemsize
    if dims <= 0 or len(blob) != expected:
        raise FormatError(f"{path}: NRM1 size mismatch for dims={dims}")
    data = np.frombuffer(blob, dtype=_F64, offset=8)
    return data[:dims].copy(), data[dims:].copy()


# ---------- CVP1 ----------

def write_cvp_file(path: Path | str, records: np.ndarray, order: int) -> Path:
    records = np.asarray(records)
    if records.ndim != 2 or records.shape[1] != order + 3:
        raise FormatError(
            f"CVP1 records must be (T, {order + 3}), got {records.shape}", code="invalid-input"
        )
    header = CVP_MAGIC + struct.pack("<2i", records.shape[0], int(order))
    body = np.ascontiguousarray(records, dtype=_F32).tobytes()
    return _write_atomic(path, header + body)


def read_cvp_file(path: Path | str) -> Tuple[np.ndarray, int]:
    """Return (records[T, order + 3] float32, order)."""
    blob = _read_bytes(path)
    if len(blob) < 12:
        raise FormatError(f"{path}: truncated CVP1 header")
    _check_magic(blob, CVP_MAGIC, path)
    frames, order = struct.unpack("<2i", blob[4:12])
    width = order + 3
    expected = 12 + frames * width * _F32.itemsize
    if frames < 0 or order <= 0 or len(blob) != expected:
        raise FormatError(f"{path}: CVP1 size mismatch (T={frames}, order={order})")
    records = np.frombuffer(blob, dtype=_F32, offset=12).reshape(frames, width).copy()
    return records, order
