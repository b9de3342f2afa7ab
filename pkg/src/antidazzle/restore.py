"""Non-blind Wiener deconvolution with a per-image power spectrum and fitted gamma."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft

from .optics import Psf


@dataclass(frozen=True)
class WienerConfig:
    gamma: float = 1e-3
    epsilon_floor: float = 1e-12

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not self.epsilon_floor > 0:
            raise ValueError("epsilon_floor must be positive")


def psf_otf(psf, dims: tuple[int, int]) -> np.ndarray:
    """Transfer function of a centred PSF zero-padded to ``dims``, centre at the origin."""
    k = np.asarray(psf.values if isinstance(psf, Psf) else psf, dtype=np.float64)
    ky, kx = k.shape
    rows, cols = dims
    if ky > rows or kx > cols:
        raise ValueError(f"PSF {k.shape} larger than image {dims}")
    padded = np.zeros((rows, cols))
    padded[:ky, :kx] = k
    padded = np.roll(padded, (-(ky // 2), -(kx // 2)), axis=(0, 1))
    return scipy.fft.fft2(padded, workers=1)


def wiener_deconvolve(img: np.ndarray, psf, cfg: WienerConfig = WienerConfig(), return_info: bool = False):
    """Wiener filter ``F conj(H) / (|H|^2 + gamma / max(mean|F|^2, floor))``.

    ``psf`` is a :class:`Psf` or a centred kernel array. The mean power
    spectrum is averaged over frequency bins. Denominators below the floor are
    raised to it, which only matters for ``gamma = 0`` with zeros in ``H``.
    With ``return_info`` a dict with the OTF condition number is returned too.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("wiener_deconvolve expects a 2-D image")
    h = psf_otf(psf, img.shape)
    f = scipy.fft.fft2(img, workers=1)
    power = float(np.mean(np.abs(f) ** 2))
    h2 = np.abs(h) ** 2
    denom = h2 + cfg.gamma / max(power, cfg.epsilon_floor)
    guarded = int(np.count_nonzero(denom < cfg.epsilon_floor))
    np.maximum(denom, cfg.epsilon_floor, out=denom)
    out = scipy.fft.ifft2(f * np.conj(h) / denom, workers=1)
    real = out.real.copy()
    if not return_info:
        return real
    habs = np.sqrt(h2)
    hmin = float(habs.min())
    info = {
        "condition_number": float(habs.max() / hmin) if hmin > 0 else math.inf,
        "mean_power": power,
        "guarded_bins": guarded,
        "imag_ratio": float(np.linalg.norm(out.imag) / max(np.linalg.norm(real), 1e-300)),
    }
    return real, info


def crop_like(arr: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    """Centred crop of ``arr`` to ``dims``; the inverse of symmetric padding."""
    rows, cols = dims
    h, w = arr.shape
    if rows > h or cols > w:
        raise ValueError(f"cannot crop {arr.shape} to {dims}")
    y0 = (h - rows) // 2
    x0 = (w - cols) // 2
    return arr[y0 : y0 + rows, x0 : x0 + cols]


def restore_padded(img: np.ndarray, psf, cfg: WienerConfig, pad: int) -> np.ndarray:
    """Zero-pad by ``pad`` per side, deconvolve, return the interior."""
    img = np.asarray(img, dtype=np.float64)
    padded = np.pad(img, pad, mode="constant")
    return crop_like(wiener_deconvolve(padded, psf, cfg), img.shape)


def _pair_mse(pair, gamma: float, floor: float) -> float:
    degraded, truth, psf = pair
    out = wiener_deconvolve(degraded, psf, WienerConfig(gamma, floor))
    truth = np.asarray(truth, dtype=np.float64)
    if out.shape != truth.shape:
        out = crop_like(out, truth.shape)
    return float(np.mean((out - truth) ** 2))


def fit_gamma(
    pairs: Sequence[tuple[np.ndarray, np.ndarray, object]],
    search: tuple[float, float] = (1e-8, 1e2),
    tol: float = 1e-3,
    epsilon_floor: float = 1e-12,
) -> float:
    """Golden-section search on ``log10(gamma)`` minimising the mean restoration MSE.

    Each pair is ``(degraded, truth, psf)``. When ``degraded`` is larger than
    ``truth`` (zero-padded input) the restoration is centre-cropped before
    comparison. Both bracket ends are evaluated too, so a monotone objective
    returns the corresponding end exactly.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("fit_gamma needs at least one pair")
    lo, hi = search
    if not (lo > 0 and hi > lo):
        raise ValueError(f"invalid search bracket {search}")

    cache: dict[float, float] = {}

    def objective(t: float) -> float:
        if t not in cache:
            g = 10.0**t
            cache[t] = sum(_pair_mse(p, g, epsilon_floor) for p in pairs) / len(pairs)
        return cache[t]

    a, b = math.log10(lo), math.log10(hi)
    invphi = (math.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    while b - a > tol:
        if objective(c) <= objective(d):
            b, d = d, c
            c = b - invphi * (b - a)
        else:
            a, c = c, d
            d = a + invphi * (b - a)
    candidates = [math.log10(lo), (a + b) / 2, math.log10(hi)]
    best = min(candidates, key=lambda t: (objective(t), t))
    if best == candidates[0]:
        return float(lo)
    if best == candidates[2]:
        return float(hi)
    return float(10.0**best)


def normalize_counts(counts: np.ndarray, s_sat: int, offset: float = 0.0) -> np.ndarray:
    """Counts to [0, 1] by the saturation count, after removing a dark offset."""
    return (np.asarray(counts, dtype=np.float64) - offset) / float(s_sat)


def counts_to_radiance(normalized: np.ndarray, s_sat: int, counts_per_radiance: float) -> np.ndarray:
    """Map offset-free normalised counts back to scene radiance units."""
    return np.asarray(normalized, dtype=np.float64) * (float(s_sat) / counts_per_radiance)
