"""Irradiance to digital counts: photons, electrons, noise, clipping, quantisation.

The photon law defaults to a signal-dependent Gaussian whose mean is the
photon rate ``p`` and whose standard deviation is ``c1 * p + c2 * sqrt(p)``.
``law="literal"`` draws from ``Normal(c1 * p, c2 * sqrt(p))`` instead; with
``c1`` in [0, 0.25] that form rescales the signal mean itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import rng as rngmod
from .errors import ConfigError

PLANCK = 6.63e-34  # J s
LIGHT_SPEED = 3e8  # m / s

PhotonLaw = Literal["modulated-std", "literal"]


@dataclass(frozen=True)
class SensorModel:
    quantum_efficiency: float = 0.56
    gain: float = 0.37  # counts per electron
    full_well: float = 25500.0
    read_noise_mean: float = 390.0
    read_noise_std: float = 10.5
    dark_current_mean: float = 0.002
    bit_depth: int = 16
    pixel_pitch: float = 5.4e-6
    resolution: tuple[int, int] = (2532, 2532)  # (W_s, H_s)

    def __post_init__(self):
        object.__setattr__(self, "resolution", tuple(int(n) for n in self.resolution))
        if not 0 < self.quantum_efficiency <= 1:
            raise ConfigError("sensor.quantum_efficiency must lie in (0, 1]")
        if not self.gain > 0:
            raise ConfigError("sensor.gain must be positive")
        if not self.full_well >= 0:
            raise ConfigError("sensor.full_well must be nonnegative")
        if not 8 <= int(self.bit_depth) <= 16:
            raise ConfigError("sensor.bit_depth must be in 8..16")
        if self.read_noise_std < 0 or self.dark_current_mean < 0:
            raise ConfigError("sensor noise parameters must be nonnegative")
        if not self.pixel_pitch > 0:
            raise ConfigError("sensor.pixel_pitch must be positive")
        if len(self.resolution) != 2 or min(self.resolution) < 1:
            raise ConfigError("sensor.resolution must be two positive integers")

    @property
    def s_sat(self) -> int:
        return 2 ** int(self.bit_depth) - 1

    @property
    def shape(self) -> tuple[int, int]:
        """Sensor frame as ``(rows, cols)``."""
        return self.resolution[1], self.resolution[0]


@dataclass(frozen=True)
class PhotonModel:
    c1: float = 0.2
    c2: float = 1.0
    law: PhotonLaw = "modulated-std"

    def __post_init__(self):
        if self.c1 < 0 or self.c2 < 0:
            raise ConfigError("photon coefficients must be nonnegative")
        if self.law not in ("modulated-std", "literal"):
            raise ConfigError(f"unknown photon law {self.law!r}")


@dataclass(frozen=True)
class NoiseSwitches:
    photon: bool = True
    dark: bool = True
    read: bool = True
    quantization: bool = True

    @classmethod
    def off(cls) -> "NoiseSwitches":
        return cls(False, False, False, False)


@dataclass
class SensorImage:
    counts: np.ndarray
    bpc: int
    exposure: float
    meta: dict = field(default_factory=dict)


def saturation_irradiance(sensor: SensorModel, wavelength: float, exposure: float) -> float:
    """Irradiance (W/m^2) that fills the full well in one exposure."""
    if not exposure > 0:
        raise ValueError("exposure must be positive")
    return (
        sensor.full_well
        * PLANCK
        * LIGHT_SPEED
        / (wavelength * exposure * sensor.pixel_pitch**2 * sensor.quantum_efficiency)
    )


def photon_rate(i_b, i_l, lambda_b: float, lambda_l: float, exposure: float, pixel_pitch: float) -> np.ndarray:
    """Mean photon count per pixel for background plus laser irradiance."""
    i_b = np.asarray(i_b, dtype=np.float64)
    i_l = np.asarray(i_l, dtype=np.float64)
    if i_b.shape != i_l.shape:
        raise ValueError(f"irradiance maps differ in shape: {i_b.shape} vs {i_l.shape}")
    return (i_b * lambda_b + i_l * lambda_l) * (exposure * pixel_pitch**2 / (PLANCK * LIGHT_SPEED))


def _generator(rng, tag: str) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return rngmod.stream(int(rng), tag)


def sample_photons(p: np.ndarray, model: PhotonModel, rng, enabled: bool = True) -> np.ndarray:
    """Gaussian photon counts around the rate ``p``, clamped at zero.

    ``rng`` is a ``numpy.random.Generator`` or an integer seed.
    """
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0):
        raise ValueError("photon rate must be nonnegative")
    if not enabled or (model.c1 == 0 and model.c2 == 0 and model.law == "modulated-std"):
        return p.copy()
    gen = _generator(rng, "photon")
    sqrt_p = np.sqrt(p)
    if model.law == "literal":
        mean, std = model.c1 * p, model.c2 * sqrt_p
    else:
        mean, std = p, model.c1 * p + model.c2 * sqrt_p
    return np.maximum(mean + std * gen.standard_normal(p.shape), 0.0)


def electrons_to_counts(
    electrons: np.ndarray,
    sensor: SensorModel,
    rng,
    switches: NoiseSwitches = NoiseSwitches(),
) -> np.ndarray:
    """Dark current, read noise, full-well clip, gain, quantisation noise, floor."""
    e = np.array(electrons, dtype=np.float64)
    if switches.dark and sensor.dark_current_mean > 0:
        e += _generator(rng, "dark").poisson(sensor.dark_current_mean, e.shape)
    if switches.read:
        e += _generator(rng, "read").normal(sensor.read_noise_mean, sensor.read_noise_std, e.shape)
    np.clip(e, 0.0, sensor.full_well, out=e)
    e *= sensor.gain
    if switches.quantization:
        e += _generator(rng, "quant").uniform(-0.5, 0.5, e.shape)
    counts = np.floor(e)
    np.clip(counts, 0, sensor.s_sat, out=counts)
    dtype = np.uint16 if sensor.s_sat <= 65535 else np.uint32
    return counts.astype(dtype)


def crop_center(arr: np.ndarray, rows: int, cols: int) -> np.ndarray:
    h, w = arr.shape
    if h < rows or w < cols:
        raise ValueError(f"input {arr.shape} smaller than sensor ({rows}, {cols})")
    y0 = (h - rows) // 2
    x0 = (w - cols) // 2
    return arr[y0 : y0 + rows, x0 : x0 + cols]


def expose(
    photons: np.ndarray,
    sensor: SensorModel,
    rng,
    switches: NoiseSwitches = NoiseSwitches(),
    exposure: float = float("nan"),
) -> SensorImage:
    """Photon counts (uncropped) to a cropped digital frame.

    The central crop is taken first; every later step acts per pixel, so this
    only avoids drawing noise for pixels that are discarded.
    """
    photons = np.asarray(photons, dtype=np.float64)
    if np.any(photons < 0):
        raise ValueError("photon counts must be nonnegative")
    rows, cols = sensor.shape
    window = crop_center(photons, rows, cols)
    counts = electrons_to_counts(sensor.quantum_efficiency * window, sensor, rng, switches)
    return SensorImage(counts, int(sensor.bit_depth), exposure)


def simulate_frame(
    i_b: np.ndarray,
    i_l: np.ndarray,
    lambda_b: float,
    lambda_l: float,
    exposure: float,
    sensor: SensorModel,
    photon: PhotonModel,
    seed: int,
    switches: NoiseSwitches = NoiseSwitches(),
) -> SensorImage:
    """Irradiance maps to a sensor frame with all randomness keyed by ``seed``."""
    rows, cols = sensor.shape
    i_b = crop_center(np.asarray(i_b), rows, cols)
    i_l = crop_center(np.asarray(i_l), rows, cols)
    p = photon_rate(i_b, i_l, lambda_b, lambda_l, exposure, sensor.pixel_pitch)
    omega = sample_photons(p, photon, seed, enabled=switches.photon)
    counts = electrons_to_counts(sensor.quantum_efficiency * omega, sensor, seed, switches)
    return SensorImage(counts, int(sensor.bit_depth), exposure)
