"""
CNN1 model files.

    magic "CNN1"
    uint32 descriptor length, UTF-8 JSON descriptor:
        {"architecture": {...}, "trained": bool, "tensors": [[name, shape], ...],
         "target_normalizer": dims or null}
    target normalizer mean, std (float64, only when present)
    tensors in declared order, little-endian float32
"""

import json
import logging
import struct
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from backend.features.normalization import FeatureNormalizer
from backend.src.core.errors import ModelError
from .model import CnnArchitecture, CnnModel

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"CNN1"
_F32 = np.dtype("<f4")
_F64 = np.dtype("<f8")


def save_model(model: CnnModel, path: Path | str) -> Path:
    path = Path(path)
    params = model.parameters()
    normalizer = model.target_normalizer
    descriptor = {
        "architecture": model.architecture.model_dump(mode="json"),
        "trained": model.trained,
        "tensors": [[name, list(value.shape)] for name, value in params],
        "target_normalizer": normalizer.dims if normalizer is not None else None,
    }
    header = json.dumps(descriptor, sort_keys=True).encode("utf-8")

    chunks = [MODEL_MAGIC, struct.pack("<I", len(header)), header]
    if normalizer is not None:
        chunks += [normalizer.mean.astype(_F64).tobytes(), normalizer.std.astype(_F64).tobytes()]
    chunks += [np.ascontiguousarray(value, dtype=_F32).tobytes() for _, value in params]

    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(b"".join(chunks))
    tmp.replace(path)
    logger.info("Saved %r -> %s", model, path)
    return path


def load_model(path: Path | str) -> CnnModel:
    path = Path(path)
    if not path.exists():
        raise ModelError(f"Model file not found: {path}", code="stage-dependency")
    blob = path.read_bytes()

    def corrupt(reason: str) -> ModelError:
        return ModelError(f"{path}: {reason}", code="corrupt-model")

    if len(blob) < 8 or blob[:4] != MODEL_MAGIC:
        raise corrupt("missing CNN1 magic")
    (length,) = struct.unpack("<I", blob[4:8])
    offset = 8 + length
    if offset > len(blob):
        raise corrupt("truncated descriptor")
    try:
        descriptor = json.loads(blob[8:offset].decode("utf-8"))
        architecture = CnnArchitecture(**descriptor["architecture"])
        declared = [(name, tuple(shape)) for name, shape in descriptor["tensors"]]
        norm_dims = descriptor["target_normalizer"]
        trained = bool(descriptor["trained"])
    except (ValueError, KeyError, TypeError, ValidationError) as e:
        raise corrupt(f"bad descriptor ({e})") from e

    model = CnnModel(architecture)
    expected = [(name, value.shape) for name, value in model.parameters()]
    if declared != expected:
        raise corrupt("tensor layout does not match the architecture")

    if norm_dims is not None:
        size = 2 * norm_dims * _F64.itemsize
        if offset + size > len(blob):
            raise corrupt("truncated normalizer")
        stats = np.frombuffer(blob, dtype=_F64, count=2 * norm_dims, offset=offset)
        model.target_normalizer = FeatureNormalizer(mean=stats[:norm_dims].copy(), std=stats[norm_dims:].copy())
        offset += size

    tensors = []
    for _, shape in expected:
        count = int(np.prod(shape))
        size = count * _F32.itemsize
        if offset + size > len(blob):
            raise corrupt("truncated tensor data")
        tensors.append(np.frombuffer(blob, dtype=_F32, count=count, offset=offset).reshape(shape).copy())
        offset += size
    if offset != len(blob):
        raise corrupt(f"{len(blob) - offset} trailing bytes")

    model.load_parameters(tensors)
    model.trained = trained
    logger.info("Loaded %r from %s", model, path)
    return model
