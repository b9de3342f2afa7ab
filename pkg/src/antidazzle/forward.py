"""Irradiance formation: scene and laser through coded or uncoded PSFs.

Scaling contract: the scene is multiplied by a constant so that its
*uncoded* irradiance peaks at ``alpha_b * I_sat(lambda_b)``; the laser impulse
is scaled so that its uncoded spot peaks at ``alpha_l * I_sat(lambda_l)``. The
same constants are then applied on the coded path, which is what makes
``peak(I_l) = alpha_l * LSR * I_sat``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import NumericalGuardError
from .optics import Psf


@dataclass(frozen=True)
class LaserParams:
    strength: float = 0.0  # alpha_l, multiples of the saturation irradiance
    direction: tuple[float, float] = (0.0, 0.0)  # (n_u, n_v)

    def __post_init__(self):
        if not self.strength >= 0:
            raise ValueError(f"laser strength must be >= 0, got {self.strength}")


@dataclass
class Irradiance:
    """Uncropped irradiance maps in W/m^2 plus the scale factors used."""

    background: np.ndarray
    laser: np.ndarray
    scene_scale: float
    laser_scale: float
    pitch: float

    @property
    def total(self) -> np.ndarray:
        return self.background + self.laser


def fft_convolve_full(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Full linear 2-D convolution, output shape ``image + kernel - 1``."""
    image = np.asarray(image, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if image.ndim != 2 or kernel.ndim != 2 or image.size == 0 or kernel.size == 0:
        raise ValueError("fft_convolve_full needs two nonempty 2-D arrays")
    out_shape = tuple(a + b - 1 for a, b in zip(image.shape, kernel.shape))
    fast = tuple(scipy.fft.next_fast_len(n, real=True) for n in out_shape)
    spec = scipy.fft.rfft2(image, fast, workers=1)
    spec *= scipy.fft.rfft2(kernel, fast, workers=1)
    full = scipy.fft.irfft2(spec, fast, workers=1)
    return full[: out_shape[0], : out_shape[1]]


def _bilinear_split(shift_px: float, n: int, axis: str) -> tuple[int, float]:
    pos = n // 2 + shift_px
    i0 = int(np.floor(pos))
    frac = pos - i0
    last = i0 + (1 if frac > 0 else 0)
    if i0 < 0 or last > n - 1:
        raise ValueError(
            f"laser footprint falls outside the grid along {axis}: "
            f"shift {shift_px:.3f} px, grid {n} px"
        )
    return i0, frac


def place_laser(laser: LaserParams, focal_length: float, pitch: float, dims: tuple[int, int]) -> np.ndarray:
    """Unit-mass impulse at ``focal_length * n / pitch`` pixels from the grid centre.

    ``dims`` is ``(rows, cols)``; ``n_u`` moves along columns (x) and ``n_v``
    along rows (y). Sub-pixel positions split the mass bilinearly.
    """
    rows, cols = dims
    n_u, n_v = laser.direction
    ix, fx = _bilinear_split(focal_length * n_u / pitch, cols, "x")
    iy, fy = _bilinear_split(focal_length * n_v / pitch, rows, "y")
    grid = np.zeros((rows, cols))
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            w = wy * wx
            if w:
                grid[iy + dy, ix + dx] += w
    return grid


def _impulse_block(impulse: np.ndarray) -> np.ndarray:
    ys, xs = np.nonzero(impulse)
    return impulse[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1]


def form_irradiance(
    scene: np.ndarray,
    laser: LaserParams,
    psf_b: Psf,
    psf_l: Psf,
    psf0_b: Psf,
    psf0_l: Psf,
    alpha_b: float,
    i_sat_b: float,
    i_sat_l: float,
    focal_length: float,
) -> Irradiance:
    """Background and laser irradiance on the sensor pitch (uncropped).

    All PSFs must be energy-normalised and share the sensor pitch.
    """
    scene = np.asarray(scene, dtype=np.float64)
    if scene.ndim != 2:
        raise ValueError("scene must be 2-D")
    if scene.min() < 0 or scene.max() > 1:
        raise ValueError("scene radiance must lie in [0, 1]")
    if not scene.max() > 0:
        raise NumericalGuardError("all-zero scene: peak scaling undefined")
    for psf in (psf_b, psf_l, psf0_b, psf0_l):
        if not psf.energy_normalized:
            raise ValueError("PSFs must be energy-normalised")
    pitch = psf_b.focal_pitch
    shapes = {psf_b.shape, psf_l.shape, psf0_b.shape, psf0_l.shape}
    if len(shapes) != 1:
        raise ValueError(f"PSF shapes differ: {sorted(shapes)}")

    uncoded_b = fft_convolve_full(scene, psf0_b.values)
    scene_scale = alpha_b * i_sat_b / float(uncoded_b.max())
    if psf_b is psf0_b or np.array_equal(psf_b.values, psf0_b.values):
        background = scene_scale * uncoded_b
    else:
        background = scene_scale * fft_convolve_full(scene, psf_b.values)
    # FFT round-off leaves ~1e-17 negatives in dark regions
    np.maximum(background, 0.0, out=background)

    if laser.strength == 0:
        return Irradiance(background, np.zeros_like(background), scene_scale, 0.0, pitch)
    impulse = place_laser(laser, focal_length, pitch, scene.shape)
    # peak of impulse * psf0 only needs the <= 2x2 nonzero block of the impulse
    peak0 = float(fft_convolve_full(_impulse_block(impulse), psf0_l.values).max())
    laser_scale = laser.strength * i_sat_l / peak0
    laser_map = laser_scale * fft_convolve_full(impulse, psf_l.values)
    np.maximum(laser_map, 0.0, out=laser_map)
    return Irradiance(background, laser_map, scene_scale, laser_scale, pitch)
