"""Pupil fields, the five half-ring phase and Fraunhofer PSF synthesis.

Grid conventions
----------------
Sample ``i`` of an ``N``-point axis sits at ``(i - N // 2) * pitch``, i.e. the
optical axis is at index ``N // 2``, matching ``fftshift``. Pupil rows run
along ``v`` and columns along ``u``; after the transform rows are focal ``y``
and columns focal ``x``. The focal pitch follows from the grid:
``wavelength * f / (N * pupil_pitch)`` per axis.

Aperture convention
-------------------
``aperture_width`` is 3.83 mm in the default config. Under the default
``aperture_convention="radius"`` it is the semi-aperture: the super-Gaussian is
``exp(-(rho**2 / W**2) ** order)`` and the ideal PSF argument is
``k * rho * W / f``. This is the reading under which the diffraction-limited
spot has the 22 um diameter (about 4.1 sensor pixels) and the coded mask
reaches a peak suppression near 1e-3. ``"diameter"`` gives the
``exp(-(4 rho**2 / W**2) ** order)`` form with semi-aperture ``W / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
import scipy.fft

from .bessel import jn_table
from .errors import ConfigError, NumericalGuardError
from .resample import resample_axis

ApertureConvention = Literal["radius", "diameter"]
PhaseForm = Literal["half-ring", "literal"]


@dataclass(frozen=True)
class OpticsConfig:
    lambda_b: float = 633e-9
    lambda_l: float = 633e-9
    focal_length: float = 0.11
    aperture_width: float = 3.83e-3
    pupil_pitch: tuple[float, float] = (3.74e-6, 3.74e-6)  # (du, dv)
    pupil_dims: tuple[int, int] = (4096, 4096)  # (N_u, N_v)
    ring_radii: tuple[float, ...] = (13.6, 91.8, 6.3, 10.3, 4.2)
    ring_angles: tuple[float, ...] = (1.86, 1.09, 1.15, 1.21, 1.22)
    harmonic_count: int = 17
    supergauss_order: int = 50
    aperture_convention: ApertureConvention = "radius"
    phase_form: PhaseForm = "half-ring"

    def __post_init__(self):
        object.__setattr__(self, "pupil_pitch", tuple(float(p) for p in self.pupil_pitch))
        object.__setattr__(self, "pupil_dims", tuple(int(n) for n in self.pupil_dims))
        object.__setattr__(self, "ring_radii", tuple(float(r) for r in self.ring_radii))
        object.__setattr__(self, "ring_angles", tuple(float(t) for t in self.ring_angles))
        positive = {
            "lambda_b": self.lambda_b,
            "lambda_l": self.lambda_l,
            "focal_length": self.focal_length,
            "aperture_width": self.aperture_width,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ConfigError(f"optics.{name} must be positive, got {value!r}")
        if len(self.pupil_pitch) != 2 or min(self.pupil_pitch) <= 0:
            raise ConfigError("optics.pupil_pitch must be two positive values")
        if len(self.pupil_dims) != 2 or min(self.pupil_dims) <= 0:
            raise ConfigError("optics.pupil_dims must be two positive integers")
        if len(self.ring_radii) != 5 or len(self.ring_angles) != 5:
            raise ConfigError("optics needs exactly 5 ring radii and 5 ring angles")
        if self.harmonic_count < 1 or self.supergauss_order < 1:
            raise ConfigError("optics.harmonic_count and supergauss_order must be >= 1")
        if self.aperture_convention not in ("radius", "diameter"):
            raise ConfigError(f"unknown aperture_convention {self.aperture_convention!r}")
        if self.phase_form not in ("half-ring", "literal"):
            raise ConfigError(f"unknown phase_form {self.phase_form!r}")
        for n, d, axis in zip(self.pupil_dims, self.pupil_pitch, "uv"):
            if n * d < 2 * self.aperture_width:
                raise ConfigError(
                    f"pupil grid too small along {axis}: N*pitch={n * d:.6g} m "
                    f"< 2*aperture_width={2 * self.aperture_width:.6g} m"
                )

    @property
    def semi_aperture(self) -> float:
        if self.aperture_convention == "radius":
            return self.aperture_width
        return self.aperture_width / 2

    def focal_pitch(self, wavelength: float) -> tuple[float, float]:
        """Focal-plane sample spacing ``(dx, dy)`` for this pupil grid."""
        (nu, nv), (du, dv) = self.pupil_dims, self.pupil_pitch
        lf = wavelength * self.focal_length
        return lf / (nu * du), lf / (nv * dv)

    def with_grid(self, n: int) -> "OpticsConfig":
        return replace(self, pupil_dims=(n, n))


@dataclass
class PupilField:
    values: np.ndarray  # complex, shape (N_v, N_u)
    pitch: tuple[float, float]  # (du, dv)

    @property
    def dims(self) -> tuple[int, int]:
        return self.values.shape[1], self.values.shape[0]


@dataclass
class Psf:
    """Sampled intensity PSF.

    ``pitch`` is ``(dx, dy)`` in metres. ``raw_energy`` keeps the sum before
    normalisation so that energy bookkeeping (Parseval) stays checkable.
    """

    values: np.ndarray
    pitch: tuple[float, float]
    wavelength: float
    energy_normalized: bool = True
    raw_energy: float = field(default=float("nan"))

    @property
    def focal_pitch(self) -> float:
        dx, dy = self.pitch
        if not np.isclose(dx, dy, rtol=1e-12, atol=0.0):
            raise ValueError(f"anisotropic PSF pitch {self.pitch}")
        return dx

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def normalized(self) -> "Psf":
        total = float(self.values.sum())
        if not total > 0:
            raise NumericalGuardError("PSF has no energy")
        return Psf(self.values / total, self.pitch, self.wavelength, True, self.raw_energy)


def centered_coords(n: int, pitch: float) -> np.ndarray:
    return (np.arange(n) - n // 2) * pitch


def super_gauss_aperture(u, v, cfg: OpticsConfig) -> np.ndarray:
    """Super-Gaussian transmittance of the circular aperture, in [0, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    w = cfg.aperture_width
    if cfg.aperture_convention == "diameter":
        s = 4.0 * (u * u + v * v) / (w * w)
    else:
        s = (u * u + v * v) / (w * w)
    with np.errstate(over="ignore"):
        return np.exp(-(s ** cfg.supergauss_order))


def _harmonics(cfg: OpticsConfig) -> tuple[np.ndarray, np.ndarray]:
    """Odd angular orders and the per-order sign of the series."""
    m = np.arange(cfg.harmonic_count)
    if cfg.phase_form == "literal":
        return 2 * (m + 1) + 1, np.ones(m.size)
    # Fourier transform of a half ring: the k-th odd harmonic picks up (-i)^k,
    # and the square-wave series starts at the fundamental.
    return 2 * m + 1, (-1.0) ** m


def _radial_terms(xi: np.ndarray, cfg: OpticsConfig):
    """Per-radius sums: ``Q0(xi)`` and the sine/cosine harmonic weights."""
    r = np.asarray(cfg.ring_radii)
    theta = np.asarray(cfg.ring_angles)
    orders, signs = _harmonics(cfg)
    x = 2.0 * np.pi * xi[None, :] * r[:, None] / cfg.aperture_width  # (5, U)
    table = jn_table(x, int(orders.max()))  # (order, 5, U)
    q0 = (r[:, None] * table[0]).sum(axis=0)
    a = signs[:, None] * 4.0 * r[None, :] / (orders[:, None] * np.pi)  # (H, 5)
    qm = table[orders]  # (H, 5, U)
    s = np.einsum("hn,hnu->hu", a * np.cos(orders[:, None] * theta[None, :]), qm)
    c = np.einsum("hn,hnu->hu", a * np.sin(orders[:, None] * theta[None, :]), qm)
    return q0, s, c, orders


def _combine(q0, s, c, orders, cos_phi, sin_phi, cfg: OpticsConfig, index=None) -> np.ndarray:
    # index maps each output sample to its column in the per-radius tables
    z = cos_phi + 1j * sin_phi
    z2 = z * z
    zm = z ** int(orders[0])
    num = np.zeros(np.shape(cos_phi))
    for h in range(orders.size):
        if h:
            zm *= z2
        sh, ch = (s[h], c[h]) if index is None else (s[h][index], c[h][index])
        num += zm.imag * sh - zm.real * ch
    if index is not None:
        q0 = q0[index]
    if cfg.phase_form == "literal":
        safe = np.where(q0 == 0.0, 1.0, q0)
        return np.where(q0 == 0.0, 0.0, np.arctan(num / safe))
    return np.arctan2(num, q0)


def five_half_ring_phase(xi, phi, cfg: OpticsConfig) -> np.ndarray:
    """Five half-ring pupil phase at polar pupil coordinates.

    Parameters
    ----------
    xi : array_like
        Radial pupil coordinate in metres, ``>= 0``.
    phi : array_like
        Azimuth in radians, measured from the ``+v`` axis towards ``+u``.
    cfg : OpticsConfig
        Supplies ring radii/angles, harmonic count and ``phase_form``.

    Returns
    -------
    ndarray
        Phase in radians. ``phase_form="literal"`` lies in (-pi/2, pi/2);
        ``"half-ring"`` is the argument of the complex series, in (-pi, pi].
    """
    xi, phi = np.broadcast_arrays(np.asarray(xi, float), np.asarray(phi, float))
    if np.any(xi < 0):
        raise ValueError("xi must be nonnegative")
    shape = xi.shape
    q0, s, c, orders = _radial_terms(xi.ravel(), cfg)
    flat_phi = phi.ravel()
    out = _combine(q0, s, c, orders, np.cos(flat_phi), np.sin(flat_phi), cfg)
    return out.reshape(shape)


def _phase_on_grid(u: np.ndarray, v: np.ndarray, cfg: OpticsConfig) -> np.ndarray:
    # The radial Bessel sums depend on xi only; evaluate once per distinct radius.
    xi = np.hypot(u, v)
    uniq, inverse = np.unique(xi, return_inverse=True)
    q0, s, c, orders = _radial_terms(uniq, cfg)
    safe = np.where(xi == 0.0, 1.0, xi)
    cos_phi = np.where(xi == 0.0, 1.0, v / safe)
    sin_phi = np.where(xi == 0.0, 0.0, u / safe)
    return _combine(q0, s, c, orders, cos_phi, sin_phi, cfg, index=inverse.ravel())


def build_pupil_field(cfg: OpticsConfig, use_phase: bool = True) -> PupilField:
    """Sample ``A(u, v) * exp(i * phase(u, v))`` on the centred pupil grid."""
    (nu, nv), (du, dv) = cfg.pupil_dims, cfg.pupil_pitch
    u = centered_coords(nu, du)[None, :]
    v = centered_coords(nv, dv)[:, None]
    amp = super_gauss_aperture(u, v, cfg)
    if not use_phase:
        return PupilField(amp.astype(np.complex128), (du, dv))
    values = np.zeros((nv, nu), dtype=np.complex128)
    inside = amp > 0.0
    rows, cols = np.nonzero(inside)
    phase = _phase_on_grid(u[0, cols], v[rows, 0], cfg)
    a = amp[inside]
    values[inside] = a * np.exp(1j * phase)
    return PupilField(values, (du, dv))


def compute_psf(pupil: PupilField, wavelength: float, cfg: OpticsConfig) -> Psf:
    """Intensity PSF as the squared modulus of the centred 2-D DFT of the pupil."""
    if pupil.dims != cfg.pupil_dims:
        raise ConfigError(f"pupil dims {pupil.dims} do not match config {cfg.pupil_dims}")
    spectrum = scipy.fft.fft2(scipy.fft.ifftshift(pupil.values), workers=1)
    spectrum = scipy.fft.fftshift(spectrum)
    intensity = spectrum.real**2 + spectrum.imag**2
    del spectrum
    raw = float(intensity.sum())
    if not raw > 0:
        raise NumericalGuardError("pupil field carries no energy")
    intensity /= raw
    return Psf(intensity, cfg.focal_pitch(wavelength), wavelength, True, raw)


def airy_psf(
    cfg: OpticsConfig,
    wavelength: float,
    grid_dims: tuple[int, int],
    pitch: float | tuple[float, float],
    normalize: bool = True,
) -> Psf:
    """Ideal diffraction-limited PSF ``(2 J1(a) / a)**2``, ``a = k rho W / f``.

    ``grid_dims`` is ``(nx, ny)``. The sample at the optical axis takes the
    limit value 1 before normalisation.
    """
    from scipy.special import j1

    px, py = (pitch, pitch) if np.isscalar(pitch) else pitch
    if not (px > 0 and py > 0):
        raise ValueError("pitch must be positive")
    nx, ny = grid_dims
    x = centered_coords(nx, px)[None, :]
    y = centered_coords(ny, py)[:, None]
    k = 2.0 * np.pi / wavelength
    arg = k * np.hypot(x, y) * cfg.semi_aperture / cfg.focal_length
    safe = np.where(arg == 0.0, 1.0, arg)
    values = np.where(arg == 0.0, 1.0, (2.0 * j1(safe) / safe) ** 2)
    raw = float(values.sum())
    psf = Psf(values, (px, py), wavelength, False, raw)
    return psf.normalized() if normalize else psf


def airy_first_zero(cfg: OpticsConfig, wavelength: float) -> float:
    """Radius of the first dark ring of :func:`airy_psf`."""
    from scipy.special import jn_zeros

    k = 2.0 * np.pi / wavelength
    return float(jn_zeros(1, 1)[0]) * cfg.focal_length / (k * cfg.semi_aperture)


def resample_psf(psf: Psf, target_pitch: float) -> Psf:
    """Bicubic resample onto an isotropic ``target_pitch``, keeping the centre.

    Coarser targets use the antialiasing kernel. Negative interpolation
    overshoot is clipped before renormalising to unit energy.
    """
    if not target_pitch > 0 or min(psf.pitch) <= 0:
        raise ValueError("pitches must be positive")
    out = psf.values
    same = True
    for axis, p_in in ((1, psf.pitch[0]), (0, psf.pitch[1])):
        if p_in == target_pitch:
            continue
        same = False
        n_in = out.shape[axis]
        ratio = target_pitch / p_in
        half_lo = (n_in // 2) / ratio
        half_hi = (n_in - 1 - n_in // 2) / ratio
        lo, hi = int(np.floor(half_lo)), int(np.floor(half_hi))
        n_out = lo + hi + 1
        if n_out < 1 or lo < 0:
            raise ValueError("target grid would be empty")
        coords = (np.arange(n_out) - lo) * ratio + n_in // 2
        out = resample_axis(out, axis, coords, ratio)
    if same:
        return Psf(psf.values.copy(), psf.pitch, psf.wavelength, psf.energy_normalized, psf.raw_energy)
    out = np.clip(out, 0.0, None)
    res = Psf(out, (target_pitch, target_pitch), psf.wavelength, False, psf.raw_energy)
    return res.normalized()


def suppression_ratio(coded: Psf, uncoded: Psf) -> float:
    """Peak ratio of a coded PSF to its uncoded reference (LSR for a point source)."""
    if not (coded.energy_normalized and uncoded.energy_normalized):
        raise ValueError("suppression ratio needs energy-normalised PSFs")
    if not np.allclose(coded.pitch, uncoded.pitch, rtol=1e-9, atol=0.0):
        raise ValueError(f"pitch mismatch {coded.pitch} vs {uncoded.pitch}")
    peak0 = float(uncoded.values.max())
    if not peak0 > 0:
        raise NumericalGuardError("uncoded PSF peak is zero")
    return float(coded.values.max()) / peak0


def psf_support(psf: Psf, fraction: float = 0.999) -> int:
    """Side of the smallest centred square holding ``fraction`` of the energy."""
    vals = psf.values
    ny, nx = vals.shape
    cy, cx = ny // 2, nx // 2
    dy = np.abs(np.arange(ny) - cy)[:, None]
    dx = np.abs(np.arange(nx) - cx)[None, :]
    cheb = np.maximum(dy, dx)
    ring = np.bincount(cheb.ravel(), weights=vals.ravel())
    cum = np.cumsum(ring)
    r = int(np.searchsorted(cum, fraction * cum[-1]))
    return 2 * r + 1


def crop_centered(arr: np.ndarray, side_y: int, side_x: int) -> np.ndarray:
    ny, nx = arr.shape
    side_y, side_x = min(side_y, ny), min(side_x, nx)
    y0 = ny // 2 - side_y // 2
    x0 = nx // 2 - side_x // 2
    return arr[y0 : y0 + side_y, x0 : x0 + side_x]


def crop_psf(psf: Psf, side: int) -> Psf:
    vals = crop_centered(psf.values, side, side)
    return Psf(vals.copy(), psf.pitch, psf.wavelength, False, psf.raw_energy).normalized()


@dataclass
class PsfPair:
    """Coded and uncoded PSFs for one wavelength on a shared pitch."""

    coded: Psf
    uncoded: Psf

    @property
    def lsr(self) -> float:
        return suppression_ratio(self.coded, self.uncoded)


def focal_psf_pair(cfg: OpticsConfig, wavelength: float, mask: bool = True) -> PsfPair:
    uncoded = compute_psf(build_pupil_field(cfg, use_phase=False), wavelength, cfg)
    if not mask:
        coded = Psf(uncoded.values.copy(), uncoded.pitch, wavelength, True, uncoded.raw_energy)
    else:
        coded = compute_psf(build_pupil_field(cfg, use_phase=True), wavelength, cfg)
    return PsfPair(coded, uncoded)


def sensor_psf_pair(
    cfg: OpticsConfig,
    wavelength: float,
    sensor_pitch: float,
    mask: bool = True,
    support_fraction: float = 0.999,
    max_side: int | None = None,
) -> PsfPair:
    """PSFs resampled to the sensor pitch and cropped to their energy support.

    Both PSFs are cropped to the same odd side, the larger of the two supports
    (bounded by ``max_side``), so they stay directly comparable.
    """
    focal = focal_psf_pair(cfg, wavelength, mask)
    coded = resample_psf(focal.coded, sensor_pitch)
    uncoded = resample_psf(focal.uncoded, sensor_pitch)
    side = max(psf_support(coded, support_fraction), psf_support(uncoded, support_fraction))
    if max_side is not None:
        side = min(side, max_side - (1 - max_side % 2))
    return PsfPair(crop_psf(coded, side), crop_psf(uncoded, side))
