"""
CNN regressor from a resized ultrasound image to one acoustic feature vector.

Layout (default architecture):
    [conv 13x13 -> swish -> dropout] x 2 -> maxpool   (30, 60 filters)
    [conv 13x13 -> swish -> dropout] x 2 -> maxpool   (90, 120 filters)
    flatten -> dense 1000 -> swish -> dropout -> dense D
"""

import itertools
import logging
from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from backend.features.normalization import FeatureNormalizer
from backend.src.core.errors import ModelError
from .layers import Conv2D, Dense, Dropout, Flatten, Identity, Layer, MaxPool2D, Swish

logger = logging.getLogger(__name__)

# MGC-LSP spectral (gain + 24 LSP), excitation (log F0, log MVF), mel
OUTPUT_DIMS = (25, 2, 80)


class CnnArchitecture(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    input_height: int = 64
    input_width: int = 128
    kernel_size: int = 13
    # filters per conv layer, grouped into blocks that each end with a 2x2 pool
    conv_blocks: Tuple[Tuple[int, ...], ...] = ((30, 60), (90, 120))
    # 0 means no hidden dense layer
    dense_units: int = 1000
    output_dim: int = 80
    dropout: float = 0.2
    activation: Literal["swish", "identity"] = "swish"

    @field_validator("output_dim")
    @classmethod
    def _check_output(cls, value: int) -> int:
        if value not in OUTPUT_DIMS:
            raise ValueError(f"output_dim must be one of {OUTPUT_DIMS}, got {value}")
        return value

    @model_validator(mode="after")
    def _check(self) -> "CnnArchitecture":
        if self.kernel_size % 2 == 0 or self.kernel_size < 1:
            raise ValueError("kernel_size must be a positive odd number")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        scale = 2 ** len(self.conv_blocks)
        if self.input_height % scale or self.input_width % scale:
            raise ValueError(
                f"input {self.input_height}x{self.input_width} not divisible by {scale} "
                f"for {len(self.conv_blocks)} pooling stages"
            )
        if any(len(block) == 0 or min(block) < 1 for block in self.conv_blocks):
            raise ValueError("every conv block needs at least one layer with >= 1 filter")
        return self

    @property
    def flat_features(self) -> int:
        scale = 2 ** len(self.conv_blocks)
        channels = self.conv_blocks[-1][-1] if self.conv_blocks else 1
        return (self.input_height // scale) * (self.input_width // scale) * channels


def tiny_architecture(output_dim: int = 2, **overrides) -> CnnArchitecture:
    """Small variant (8x16 input) with the same layer pattern, for checks and toy runs."""
    params = dict(
        input_height=8,
        input_width=16,
        kernel_size=3,
        conv_blocks=((2, 3), (3, 4)),
        dense_units=8,
        output_dim=output_dim,
    )
    params.update(overrides)
    return CnnArchitecture(**params)


@dataclass
class ForwardPass:
    output: np.ndarray
    caches: Optional[list] = None
    version: int = -1


_versions = itertools.count()


class CnnModel:
    def __init__(
        self,
        architecture: CnnArchitecture,
        seed: int = 0,
        dtype=np.float32,
        target_normalizer: Optional[FeatureNormalizer] = None,
    ) -> None:
        self.architecture = architecture
        self.dtype = np.dtype(dtype)
        self.target_normalizer = target_normalizer
        self.trained = False
        self.layers: List[Layer] = self._build(np.random.default_rng(seed))
        self._version = next(_versions)

    def _activation(self) -> Layer:
        return Swish() if self.architecture.activation == "swish" else Identity()

    def _build(self, rng: np.random.Generator) -> List[Layer]:
        arch = self.architecture
        layers: List[Layer] = []
        channels = 1
        for block in arch.conv_blocks:
            for filters in block:
                layers += [
                    Conv2D(channels, filters, arch.kernel_size, rng, self.dtype),
                    self._activation(),
                    Dropout(arch.dropout),
                ]
                channels = filters
            layers.append(MaxPool2D())
        layers.append(Flatten())
        width = arch.flat_features
        if arch.dense_units:
            layers += [Dense(width, arch.dense_units, rng, self.dtype), self._activation(), Dropout(arch.dropout)]
            width = arch.dense_units
        layers.append(Dense(width, arch.output_dim, rng, self.dtype))
        return layers

    # ---------- Parameters ----------

    def parameters(self) -> List[Tuple[str, np.ndarray]]:
        """(name, tensor) pairs in a fixed declaration order."""
        out = []
        for i, layer in enumerate(self.layers):
            for key, value in layer.params.items():
                out.append((f"{i}.{layer.name}.{key}", value))
        return out

    def load_parameters(self, tensors: List[np.ndarray]) -> None:
        current = self.parameters()
        if len(tensors) != len(current):
            raise ModelError(f"Expected {len(current)} tensors, got {len(tensors)}", code="corrupt-model")
        for (name, old), new in zip(current, tensors):
            if old.shape != new.shape:
                raise ModelError(f"Tensor {name}: shape {new.shape} != {old.shape}", code="corrupt-model")
        for (name, _), new in zip(current, tensors):
            layer_index, _, key = name.split(".")
            self.layers[int(layer_index)].params[key] = np.array(new, dtype=self.dtype)
        self._touch()

    def copy_parameters(self) -> List[np.ndarray]:
        return [value.copy() for _, value in self.parameters()]

    def apply_gradients(self, grads: List[np.ndarray], learning_rate: float) -> None:
        params = self.parameters()
        for (_, value), grad in zip(params, grads):
            value -= value.dtype.type(learning_rate) * grad.astype(value.dtype)
        self._touch()

    def _touch(self) -> None:
        self._version = next(_versions)

    # ---------- Forward / backward ----------

    def _as_batch(self, images: np.ndarray) -> Tuple[np.ndarray, bool]:
        images = np.asarray(images)
        arch = self.architecture
        single = images.ndim == 2
        batch = images[None] if single else images
        if batch.ndim != 3 or batch.shape[1:] != (arch.input_height, arch.input_width):
            raise ModelError(
                f"Expected image(s) of shape {arch.input_height}x{arch.input_width}, got {images.shape}",
                code="invalid-input",
            )
        return batch[..., None].astype(self.dtype, copy=False), single

    def forward(
        self,
        images: np.ndarray,
        train_mode: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> ForwardPass:
        """
        Run one image (H, W) or a batch (B, H, W).

        In train mode dropout is active and per-layer caches are kept for backward.
        """
        x, single = self._as_batch(images)
        caches = [] if train_mode else None
        for layer in self.layers:
            x, cache = layer.forward(x, train_mode, rng)
            if caches is not None:
                caches.append(cache)
        output = x[0] if single else x
        return ForwardPass(output=output, caches=caches, version=self._version)

    def backward(self, result: ForwardPass, target: np.ndarray) -> Tuple[float, List[np.ndarray]]:
        """MSE loss and its gradient for every tensor, in parameters() order."""
        if result.caches is None or result.version != self._version:
            raise ModelError(
                "Forward cache is missing or predates the current weights", code="invalid-cache"
            )
        output = np.atleast_2d(result.output)
        target = np.asarray(target, dtype=output.dtype).reshape(output.shape)
        diff = output - target
        loss = float(np.mean(diff.astype(np.float64) ** 2))
        grad = 2.0 * diff / diff.size

        grads_by_layer = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            grad, layer_grads = self.layers[i].backward(grad, result.caches[i])
            grads_by_layer[i] = layer_grads
        ordered = [grads_by_layer[i][key] for i, layer in enumerate(self.layers) for key in layer.params]
        return loss, ordered

    # ---------- Inference ----------

    def predict_sequence(self, frames: np.ndarray, batch_size: int = 64) -> np.ndarray:
        """(T, H, W) frames -> (T, D) denormalized features, eval mode."""
        if not self.trained:
            raise ModelError("Model has not been trained", code="untrained-model")
        frames = np.asarray(frames)
        arch = self.architecture
        if frames.ndim != 3 and not (frames.ndim == 1 and frames.size == 0):
            raise ModelError(f"Expected (T, H, W) frames, got shape {frames.shape}", code="invalid-input")
        if frames.shape[0] == 0:
            return np.empty((0, arch.output_dim))

        rows = [
            self.forward(frames[start : start + batch_size]).output
            for start in range(0, frames.shape[0], batch_size)
        ]
        out = np.concatenate(rows, axis=0).astype(np.float64)
        if self.target_normalizer is not None:
            out = self.target_normalizer.invert(out)
        return out

    def __repr__(self) -> str:
        count = sum(v.size for _, v in self.parameters())
        return f"CnnModel(output_dim={self.architecture.output_dim}, params={count}, trained={self.trained})"
