"""
Stateless NumPy layers with explicit forward caches.

Tensors are channels-last: images (B, H, W, C), vectors (B, N).
Every layer implements

    forward(x, train, rng)  -> (y, cache)
    backward(grad_y, cache) -> (grad_x, {param_name: grad})

so a forward pass can be replayed for backprop without hidden state.
"""

import itertools
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.special import expit

Grads = Dict[str, np.ndarray]


class Layer:
    name = "layer"

    def __init__(self) -> None:
        self.params: Dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray, train: bool, rng: Optional[np.random.Generator]) -> Tuple[np.ndarray, Any]:
        raise NotImplementedError

    def backward(self, grad: np.ndarray, cache: Any) -> Tuple[np.ndarray, Grads]:
        raise NotImplementedError

    def __repr__(self) -> str:
        shapes = ", ".join(f"{k}={v.shape}" for k, v in self.params.items())
        return f"{type(self).__name__}({shapes})"


def he_uniform(shape: Tuple[int, ...], fan_in: int, rng: np.random.Generator, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv2D(Layer):
    """
    Stride-1 convolution with same padding (odd kernel).

    Summed over kernel offsets as shifted-input matmuls; peak memory is one
    (B, H, W, max(C, O)) buffer, never a (B, H, W, C, k, k) window tensor.
    """

    name = "conv"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, rng, dtype=np.float32) -> None:
        super().__init__()
        if kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd for same padding")
        self.kernel_size = kernel_size
        fan_in = kernel_size * kernel_size * in_channels
        self.params["W"] = he_uniform((kernel_size, kernel_size, in_channels, out_channels), fan_in, rng, dtype)
        self.params["b"] = np.zeros(out_channels, dtype=dtype)

    def _pad(self, x: np.ndarray) -> np.ndarray:
        pad = self.kernel_size // 2
        return np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))

    def _offsets(self):
        return itertools.product(range(self.kernel_size), repeat=2)

    def forward(self, x, train, rng):
        b, h, w, _ = x.shape
        weights = self.params["W"]
        padded = self._pad(x)
        y = np.zeros((b, h, w, weights.shape[3]), dtype=np.result_type(x, weights))
        for i, j in self._offsets():
            y += padded[:, i : i + h, j : j + w, :] @ weights[i, j]
        y += self.params["b"]
        return y, x

    def backward(self, grad, cache):
        x = cache
        _, h, w, _ = x.shape
        pad = self.kernel_size // 2
        weights = self.params["W"]
        padded = self._pad(x)
        grad_w = np.empty(weights.shape, dtype=np.result_type(x, grad))
        grad_padded = np.zeros(padded.shape, dtype=np.result_type(grad, weights))
        for i, j in self._offsets():
            grad_w[i, j] = np.tensordot(padded[:, i : i + h, j : j + w, :], grad, axes=([0, 1, 2], [0, 1, 2]))
            grad_padded[:, i : i + h, j : j + w, :] += grad @ weights[i, j].T
        grads = {"W": grad_w, "b": grad.sum(axis=(0, 1, 2))}
        return grad_padded[:, pad : pad + h, pad : pad + w, :], grads


class MaxPool2D(Layer):
    """2x2 max pooling, stride 2; ties go to the first element in row-major order."""

    name = "pool"

    def forward(self, x, train, rng):
        b, h, w, c = x.shape
        if h % 2 or w % 2:
            raise ValueError(f"MaxPool2D needs even spatial dims, got {h}x{w}")
        blocks = x.reshape(b, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 5, 2, 4).reshape(b, h // 2, w // 2, c, 4)
        winner = np.argmax(blocks, axis=-1)
        y = np.take_along_axis(blocks, winner[..., None], axis=-1)[..., 0]
        return y, (x.shape, winner)

    def backward(self, grad, cache):
        shape, winner = cache
        b, h, w, c = shape
        routed = np.zeros((b, h // 2, w // 2, c, 4), dtype=grad.dtype)
        np.put_along_axis(routed, winner[..., None], grad[..., None], axis=-1)
        grad_x = routed.reshape(b, h // 2, w // 2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(shape)
        return grad_x, {}


class Flatten(Layer):
    name = "flatten"

    def forward(self, x, train, rng):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, grad, cache):
        return grad.reshape(cache), {}


class Dense(Layer):
    name = "dense"

    def __init__(self, in_features: int, out_features: int, rng, dtype=np.float32) -> None:
        super().__init__()
        self.params["W"] = he_uniform((in_features, out_features), in_features, rng, dtype)
        self.params["b"] = np.zeros(out_features, dtype=dtype)

    def forward(self, x, train, rng):
        return x @ self.params["W"] + self.params["b"], x

    def backward(self, grad, cache):
        x = cache
        grads = {"W": x.T @ grad, "b": grad.sum(axis=0)}
        return grad @ self.params["W"].T, grads


class Swish(Layer):
    """x * sigmoid(x); derivative sigmoid(x) + x * sigmoid(x) * (1 - sigmoid(x))."""

    name = "swish"

    def forward(self, x, train, rng):
        sig = expit(x)
        return x * sig, (x, sig)

    def backward(self, grad, cache):
        x, sig = cache
        return grad * swish_derivative(x, sig), {}


def swish_derivative(x: np.ndarray, sig: Optional[np.ndarray] = None) -> np.ndarray:
    if sig is None:
        sig = expit(x)
    return sig + x * sig * (1.0 - sig)


class Identity(Layer):
    name = "identity"

    def forward(self, x, train, rng):
        return x, None

    def backward(self, grad, cache):
        return grad, {}


class Dropout(Layer):
    """Inverted dropout: kept units are scaled by 1 / (1 - p) during training only."""

    name = "dropout"

    def __init__(self, rate: float) -> None:
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x, train, rng):
        if not train or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ValueError("Dropout in training mode needs an rng")
        mask = (rng.random(x.shape) >= self.rate).astype(x.dtype) / x.dtype.type(1.0 - self.rate)
        return x * mask, mask

    def backward(self, grad, cache):
        if cache is None:
            return grad, {}
        return grad * cache, {}
