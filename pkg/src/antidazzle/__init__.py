"""Wavefront-coded anti-dazzle imaging simulator.

Pupil-phase PSFs, scene and laser irradiance formation, a sensor noise model,
dataset synthesis, Wiener restoration, quality metrics and noise calibration.
"""

from .errors import AntiDazzleError, ConfigError, DataIOError, NumericalGuardError
from .optics import OpticsConfig, Psf, PsfPair, focal_psf_pair, sensor_psf_pair
from .sensor import NoiseSwitches, PhotonModel, SensorModel

__version__ = "0.1.0"

__all__ = [
    "AntiDazzleError",
    "ConfigError",
    "DataIOError",
    "NumericalGuardError",
    "OpticsConfig",
    "Psf",
    "PsfPair",
    "focal_psf_pair",
    "sensor_psf_pair",
    "NoiseSwitches",
    "PhotonModel",
    "SensorModel",
]
