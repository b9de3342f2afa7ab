"""Read-noise calibration from dark frames and histogram validation.

Dark frames are grouped by exposure time. Frames of one exposure are averaged
into a single dark frame; the bias frame (shortest exposure) gives the read
noise mean and each averaged frame's spatial std gives ``sigma_r(t)``.
Counts are converted to electrons by dividing by the gain, ignoring the
sub-count quantisation bias.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io as aio
from . import rng as rngmod
from .errors import DataIOError
from .sensor import NoiseSwitches, SensorImage, SensorModel, electrons_to_counts

EXPOSURE_LADDER = (0.001, 0.01, 0.1, 1.0)
_FRAME_NAME = re.compile(r"^(?P<t>[0-9.eE+-]+)_(?P<i>\d+)\.png$")


@dataclass
class CalibrationResult:
    mu_r: float
    sigma_r_per_exposure: dict[float, float]
    histogram_divergences: dict[float, float] = field(default_factory=dict)
    frames_per_exposure: dict[float, int] = field(default_factory=dict)
    per_frame: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("sigma_r_per_exposure", "histogram_divergences", "frames_per_exposure"):
            d[key] = {repr(float(t)): v for t, v in sorted(d[key].items())}
        d["units"] = "electrons"
        d["note"] = "counts converted to electrons by 1/gain; quantisation bias (< 0.5 count) ignored"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _stack(frames) -> np.ndarray:
    arrs = [np.asarray(f.counts if isinstance(f, SensorImage) else f, dtype=np.float64) for f in frames]
    if not arrs:
        raise ValueError("empty exposure group")
    shapes = {a.shape for a in arrs}
    if len(shapes) != 1:
        raise ValueError(f"inconsistent frame dims: {sorted(shapes)}")
    return np.stack(arrs)


def estimate_read_noise(
    dark_frames: dict[float, list],
    sensor: SensorModel,
    ladder: tuple[float, ...] = EXPOSURE_LADDER,
    per_frame: bool = False,
) -> CalibrationResult:
    """Estimate ``mu_r`` and ``sigma_r(t)`` in electrons.

    ``sigma_r(t)`` is the std of the averaged frame, so with ``N`` frames it
    estimates ``sigma_r / sqrt(N)``. ``per_frame=True`` multiplies by
    ``sqrt(N)`` to recover the single-frame read noise instead.
    """
    if not dark_frames:
        raise ValueError("no dark frames")
    groups = {float(t): _stack(f) for t, f in dark_frames.items()}
    for t in groups:
        if not any(math.isclose(t, s, rel_tol=1e-9) for s in ladder):
            raise ValueError(f"exposure {t} not in ladder {ladder}")
    shapes = {g.shape[1:] for g in groups.values()}
    if len(shapes) != 1:
        raise ValueError(f"inconsistent frame dims across exposures: {sorted(shapes)}")
    bias_t = min(ladder)
    bias_key = next((t for t in groups if math.isclose(t, bias_t, rel_tol=1e-9)), None)
    if bias_key is None:
        raise ValueError(f"missing bias exposure t = {bias_t} s")

    averaged = {t: g.mean(axis=0) for t, g in groups.items()}
    mu_r = float(averaged[bias_key].mean() / sensor.gain)
    sigma = {}
    for t, frame in sorted(averaged.items()):
        s = float(frame.std() / sensor.gain)
        if per_frame:
            s *= math.sqrt(groups[t].shape[0])
        sigma[t] = s
    counts = {t: int(g.shape[0]) for t, g in groups.items()}
    return CalibrationResult(mu_r, sigma, {}, counts, per_frame)


def histogram_divergence(measured, simulated, bins: int = 64) -> float:
    """Symmetric chi-squared distance ``sum (p - q)^2 / (p + q)`` in [0, 2]."""
    a = np.asarray(measured.counts if isinstance(measured, SensorImage) else measured).ravel()
    b = np.asarray(simulated.counts if isinstance(simulated, SensorImage) else simulated).ravel()
    if isinstance(measured, SensorImage) and isinstance(simulated, SensorImage) and measured.bpc != simulated.bpc:
        raise ValueError("bit depths differ")
    if a.size == 0 or b.size == 0:
        raise ValueError("empty image")
    lo = float(min(a.min(), b.min()))
    hi = float(max(a.max(), b.max()))
    if hi == lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    p = np.histogram(a, edges)[0] / a.size
    q = np.histogram(b, edges)[0] / b.size
    s = p + q
    nz = s > 0
    return float(np.sum((p[nz] - q[nz]) ** 2 / s[nz]))


def simulate_dark_frames(
    sensor: SensorModel,
    shape: tuple[int, int],
    frames_per_exposure: int,
    seed: int,
    ladder: tuple[float, ...] = EXPOSURE_LADDER,
    switches: NoiseSwitches = NoiseSwitches(photon=False),
) -> dict[float, list[np.ndarray]]:
    """Capped-lens frames: zero photons through the electron-to-count chain."""
    zeros = np.zeros(shape)
    out = {}
    for t in ladder:
        out[t] = [
            electrons_to_counts(zeros, sensor, rngmod.stream(seed, "dark-frame", repr(float(t)), i), switches)
            for i in range(frames_per_exposure)
        ]
    return out


def validate(result: CalibrationResult, dark_frames: dict[float, list], sensor: SensorModel,
             seed: int, bins: int = 64) -> CalibrationResult:
    """Fill ``histogram_divergences`` by re-simulating one frame per exposure."""
    for t, frames in sorted(dark_frames.items()):
        measured = np.asarray(frames[0])
        model = SensorModel(**{**asdict(sensor), "read_noise_mean": result.mu_r,
                               "read_noise_std": result.sigma_r_per_exposure[float(t)]
                               * (1.0 if result.per_frame else math.sqrt(len(frames)))})
        sim = simulate_dark_frames(model, measured.shape, 1, seed, ladder=(float(t),))[float(t)][0]
        result.histogram_divergences[float(t)] = histogram_divergence(measured, sim, bins)
    return result


def fit_photon_coefficients(mean_photons, std_photons) -> tuple[float, float]:
    """Least-squares ``std = c1 * p + c2 * sqrt(p)`` over gray-level patches."""
    p = np.asarray(mean_photons, dtype=np.float64).ravel()
    s = np.asarray(std_photons, dtype=np.float64).ravel()
    if p.size != s.size or p.size < 2:
        raise ValueError("need at least two matching (mean, std) levels")
    if np.any(p < 0):
        raise ValueError("photon means must be nonnegative")
    a = np.column_stack([p, np.sqrt(p)])
    (c1, c2), *_ = np.linalg.lstsq(a, s, rcond=None)
    return float(c1), float(c2)


def load_dark_frames(directory) -> dict[float, list[np.ndarray]]:
    """Read ``{exposure}_{index}.png`` frames, grouped by exposure, ordered by index."""
    root = Path(directory)
    if not root.is_dir():
        raise DataIOError(f"frame directory not found: {root}")
    found: dict[float, list[tuple[int, Path]]] = {}
    for path in sorted(root.glob("*.png")):
        m = _FRAME_NAME.match(path.name)
        if m is None:
            continue
        try:
            t = float(m["t"])
        except ValueError:
            continue
        found.setdefault(t, []).append((int(m["i"]), path))
    if not found:
        raise DataIOError(f"no {{exposure}}_{{index}}.png frames in {root}")
    return {t: [aio.read_png(p) for _, p in sorted(items)] for t, items in sorted(found.items())}


def write_dark_frames(directory, frames: dict[float, list[np.ndarray]]) -> None:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    for t, group in frames.items():
        for i, frame in enumerate(group):
            aio.write_png16(root / f"{t:g}_{i}.png", frame)

