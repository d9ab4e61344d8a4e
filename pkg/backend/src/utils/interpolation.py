"""
Cubic-convolution (Keys) interpolation helpers.

Used for bicubic ultrasound resizing and for hop resampling of feature
matrices along time. Out-of-range taps are clamped to the nearest edge sample.
"""

import numpy as np

KEYS_A = -0.5


def keys_kernel(s: np.ndarray, a: float = KEYS_A) -> np.ndarray:
    """Keys cubic convolution kernel evaluated at offsets ``s``."""
    s = np.abs(np.asarray(s, dtype=np.float64))
    out = np.zeros_like(s)

    near = s <= 1.0
    far = (s > 1.0) & (s < 2.0)

    sn = s[near]
    out[near] = (a + 2.0) * sn**3 - (a + 3.0) * sn**2 + 1.0
    sf = s[far]
    out[far] = a * sf**3 - 5.0 * a * sf**2 + 8.0 * a * sf - 4.0 * a
    return out


def cubic_weight_matrix(positions: np.ndarray, in_size: int, a: float = KEYS_A) -> np.ndarray:
    """
    Dense (len(positions), in_size) interpolation matrix.

    Row i holds the four Keys weights for the source coordinate positions[i];
    taps falling outside [0, in_size) are folded onto the edge samples.
    """
    positions = np.asarray(positions, dtype=np.float64)
    base = np.floor(positions).astype(np.int64)

    weights = np.zeros((positions.size, in_size), dtype=np.float64)
    rows = np.arange(positions.size)
    for offset in (-1, 0, 1, 2):
        taps = base + offset
        w = keys_kernel(positions - taps, a)
        np.add.at(weights, (rows, np.clip(taps, 0, in_size - 1)), w)
    return weights


def half_pixel_positions(in_size: int, out_size: int) -> np.ndarray:
    """Source coordinates of output pixel centres (image resizing convention)."""
    scale = in_size / out_size
    return (np.arange(out_size) + 0.5) * scale - 0.5
