"""Separable bicubic resampling with antialiasing.

Both the PSF pitch conversion and the dataset downsampling go through
:func:`resample_axis`. When the output grid is coarser than the input, the
cubic kernel is stretched by the scale factor so it doubles as a low-pass
prefilter. Taps falling outside the input are dropped and the remaining
weights renormalised, so constants are reproduced exactly.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

CUBIC_A = -0.5


def cubic_kernel(t, a: float = CUBIC_A) -> np.ndarray:
    """Keys cubic convolution kernel, support [-2, 2]."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    t2 = t * t
    t3 = t2 * t
    near = (a + 2.0) * t3 - (a + 3.0) * t2 + 1.0
    far = a * t3 - 5.0 * a * t2 + 8.0 * a * t - 4.0 * a
    return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))


def weight_matrix(n_in: int, coords: np.ndarray, scale: float) -> sp.csr_matrix:
    """Sparse ``(len(coords), n_in)`` interpolation matrix.

    ``coords`` are fractional input indices of the output samples and
    ``scale`` is the input-to-output spacing ratio (``> 1`` means
    downsampling).
    """
    support = 2.0 * max(scale, 1.0)
    stretch = max(scale, 1.0)
    coords = np.asarray(coords, dtype=np.float64)
    lo = np.floor(coords - support).astype(np.int64) + 1
    width = int(np.ceil(2 * support)) + 1
    taps = lo[:, None] + np.arange(width)[None, :]
    w = cubic_kernel((taps - coords[:, None]) / stretch)
    w[(taps < 0) | (taps >= n_in)] = 0.0
    total = w.sum(axis=1)
    if np.any(total == 0.0):
        raise ValueError("output sample has no support inside the input grid")
    w /= total[:, None]
    rows = np.repeat(np.arange(coords.size), width)
    keep = w.ravel() != 0.0
    mat = sp.csr_matrix(
        (w.ravel()[keep], (rows[keep], np.clip(taps, 0, n_in - 1).ravel()[keep])),
        shape=(coords.size, n_in),
    )
    mat.sum_duplicates()
    return mat


def resample_axis(arr: np.ndarray, axis: int, coords: np.ndarray, scale: float) -> np.ndarray:
    mat = weight_matrix(arr.shape[axis], coords, scale)
    moved = np.moveaxis(arr, axis, 0)
    flat = moved.reshape(moved.shape[0], -1)
    out = np.asarray(mat @ flat)
    return np.moveaxis(out.reshape((coords.size,) + moved.shape[1:]), 0, axis)


def area_coords(n_in: int, n_out: int) -> tuple[np.ndarray, float]:
    """Pixel-centre aligned coordinates for resizing ``n_in`` samples to ``n_out``."""
    scale = n_in / n_out
    return (np.arange(n_out) + 0.5) * scale - 0.5, scale


def resize(img: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    """Antialiased bicubic resize of a 2-D array to ``dims = (rows, cols)``."""
    out = np.asarray(img, dtype=np.float64)
    for axis, n_out in enumerate(dims):
        n_in = out.shape[axis]
        if n_in == n_out:
            continue
        coords, scale = area_coords(n_in, n_out)
        out = resample_axis(out, axis, coords, scale)
    return out
