"""Dataset synthesis: parameter sampling, per-sample simulation and manifests."""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io as aio
from . import rng as rngmod
from .errors import ConfigError, DataIOError
from .forward import Irradiance, LaserParams, form_irradiance
from .optics import OpticsConfig, Psf, PsfPair
from .resample import resize
from .sensor import (
    LIGHT_SPEED,
    PLANCK,
    NoiseSwitches,
    PhotonModel,
    SensorImage,
    SensorModel,
    saturation_irradiance,
    simulate_frame,
)


@dataclass(frozen=True)
class DegradationPreset:
    name: str
    alpha_l: float
    alpha_b: float
    c1: float


PRESETS: dict[str, DegradationPreset] = {
    p.name: p
    for p in (
        DegradationPreset("E1", 0.0, 0.8, 0.01),
        DegradationPreset("E2", 3e4, 0.6, 0.03),
        DegradationPreset("M", 3e5, 0.4, 0.05),
        DegradationPreset("H1", 1e6, 0.3, 0.10),
        DegradationPreset("H2", 1.5e6, 0.2, 0.20),
    )
}

# Held fixed whenever a preset is active.
PRESET_FIXED = {
    "c2": 1.0,
    "read_noise_mean": 390.0,
    "read_noise_std": 10.5,
    "dark_current_mean": 0.002,
    "exposure": 0.1,
}


@dataclass(frozen=True)
class DatasetConfig:
    alpha_l_range: tuple[float, float] = (0.0, 2e6)
    alpha_l_table_size: int = 10000
    alpha_b_range: tuple[float, float] = (0.3, 0.7)
    c1_range: tuple[float, float] = (0.0, 0.25)
    c2_range: tuple[float, float] = (0.9, 1.1)
    read_noise_mean_range: tuple[float, float] = (350.0, 400.0)
    read_noise_std_range: tuple[float, float] = (10.0, 11.0)
    dark_current_mean: float = 0.002
    exposure_mean: float = 0.1
    exposure_rel_std: float = 0.1
    laser_spread: float = 0.36  # 3-sigma footprint as a fraction of the sensor half-size
    work_dims: tuple[int, int] = (256, 256)
    padded_dims: tuple[int, int] = (384, 384)
    preset: str | None = None

    def __post_init__(self):
        for name in ("alpha_l_range", "alpha_b_range", "c1_range", "c2_range",
                     "read_noise_mean_range", "read_noise_std_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"dataset.{name} has lo > hi")
            object.__setattr__(self, name, (float(lo), float(hi)))
        object.__setattr__(self, "work_dims", tuple(int(n) for n in self.work_dims))
        object.__setattr__(self, "padded_dims", tuple(int(n) for n in self.padded_dims))
        if self.alpha_l_table_size < 1:
            raise ConfigError("dataset.alpha_l_table_size must be >= 1")
        if min(self.work_dims) < 1:
            raise ConfigError("dataset.work_dims must be positive")
        if any(p < w for p, w in zip(self.padded_dims, self.work_dims)):
            raise ConfigError("dataset.padded_dims must not be smaller than work_dims")
        if self.preset is not None and self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")

    def alpha_l_table(self) -> np.ndarray:
        lo, hi = self.alpha_l_range
        return np.linspace(lo, hi, self.alpha_l_table_size)


@dataclass(frozen=True)
class SceneInfo:
    scene_id: str
    rows: int
    cols: int


@dataclass(frozen=True)
class SampleSpec:
    scene_id: str
    crop_rect: tuple[int, int, int, int]  # (x0, y0, width, height)
    alpha_b: float
    alpha_l: float
    direction: tuple[float, float]
    exposure: float
    c1: float
    c2: float
    read_noise_mean: float
    read_noise_std: float
    dark_current_mean: float
    seed: int
    preset: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["crop_rect"] = list(self.crop_rect)
        d["direction"] = list(self.direction)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SampleSpec":
        d = dict(d)
        d["crop_rect"] = tuple(int(v) for v in d["crop_rect"])
        d["direction"] = tuple(float(v) for v in d["direction"])
        return cls(**d)


class SceneStore:
    """A flat directory of grayscale (or colour, converted) PNG scenes."""

    def __init__(self, root):
        self.root = Path(root)
        if not self.root.is_dir():
            raise DataIOError(f"scene directory not found: {self.root}")
        self._paths = {p.stem: p for p in sorted(self.root.glob("*.png"))}
        if not self._paths:
            raise DataIOError(f"no PNG scenes in {self.root}")

    def ids(self) -> list[str]:
        return sorted(self._paths)

    def path(self, scene_id: str) -> Path:
        try:
            return self._paths[scene_id]
        except KeyError:
            raise DataIOError(f"missing scene {scene_id!r} in {self.root}") from None

    def info(self) -> list[SceneInfo]:
        from PIL import Image

        out = []
        for sid in self.ids():
            with Image.open(self._paths[sid]) as img:
                cols, rows = img.size
            out.append(SceneInfo(sid, rows, cols))
        return out

    def load(self, scene_id: str) -> np.ndarray:
        return aio.read_radiance(self.path(scene_id))


def _uniform(gen: np.random.Generator, bounds: tuple[float, float]) -> float:
    lo, hi = bounds
    return float(gen.uniform(lo, hi))


def laser_sigma(cfg: DatasetConfig, sensor: SensorModel, focal_length: float) -> tuple[float, float]:
    """Per-axis std of the direction cosines ``(n_u, n_v)``."""
    w_s, h_s = sensor.resolution
    half = np.array([w_s, h_s], dtype=float) * sensor.pixel_pitch / 2
    return tuple(float(s) for s in cfg.laser_spread * half / (3.0 * focal_length))


def sample_spec(
    cfg: DatasetConfig,
    index: int,
    master_seed: int,
    scenes: list[SceneInfo],
    sensor: SensorModel,
    focal_length: float,
) -> SampleSpec:
    """Draw one fully resolved sample; a pure function of its arguments."""
    if index < 0:
        raise ValueError("index must be nonnegative")
    if not scenes:
        raise DataIOError("no scenes available")
    gen = rngmod.stream(master_seed, "sample", index)
    w_s, h_s = sensor.resolution

    scene = scenes[int(gen.integers(len(scenes)))]
    if scene.rows < h_s or scene.cols < w_s:
        raise DataIOError(f"scene {scene.scene_id} ({scene.cols}x{scene.rows}) smaller than sensor {w_s}x{h_s}")
    x0 = int(gen.integers(scene.cols - w_s + 1))
    y0 = int(gen.integers(scene.rows - h_s + 1))

    table = cfg.alpha_l_table()
    alpha_l = float(table[int(gen.integers(table.size))])
    sig_u, sig_v = laser_sigma(cfg, sensor, focal_length)
    lim_u = (w_s // 2 - 1) * sensor.pixel_pitch / focal_length
    lim_v = (h_s // 2 - 1) * sensor.pixel_pitch / focal_length
    n_u = float(np.clip(gen.normal(0.0, sig_u), -lim_u, lim_u))
    n_v = float(np.clip(gen.normal(0.0, sig_v), -lim_v, lim_v))
    alpha_b = _uniform(gen, cfg.alpha_b_range)
    c1 = _uniform(gen, cfg.c1_range)
    c2 = _uniform(gen, cfg.c2_range)
    mu_r = _uniform(gen, cfg.read_noise_mean_range)
    sigma_r = _uniform(gen, cfg.read_noise_std_range)
    mu_c = max(0.0, float(gen.normal(cfg.dark_current_mean, cfg.dark_current_mean / 2)))
    exposure = float(gen.normal(cfg.exposure_mean, cfg.exposure_rel_std * cfg.exposure_mean))
    exposure = max(exposure, 1e-3 * cfg.exposure_mean)

    spec = SampleSpec(
        scene_id=scene.scene_id,
        crop_rect=(x0, y0, w_s, h_s),
        alpha_b=alpha_b,
        alpha_l=alpha_l,
        direction=(n_u, n_v),
        exposure=exposure,
        c1=c1,
        c2=c2,
        read_noise_mean=mu_r,
        read_noise_std=sigma_r,
        dark_current_mean=mu_c,
        seed=rngmod.derive_seed(master_seed, "noise", index),
    )
    if cfg.preset is not None:
        spec = apply_preset(spec, cfg.preset)
    return spec


def apply_preset(spec: SampleSpec, name: str) -> SampleSpec:
    try:
        p = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(spec, alpha_l=p.alpha_l, alpha_b=p.alpha_b, c1=p.c1, preset=name, **PRESET_FIXED)


def downsample_antialiased(img: np.ndarray, target_dims: tuple[int, int]) -> np.ndarray:
    """Antialiased bicubic downsampling to ``(rows, cols)``, clamped to the input range."""
    img = np.asarray(img, dtype=np.float64)
    rows, cols = target_dims
    if rows < 1 or cols < 1:
        raise ValueError("target dims must be positive")
    if rows > img.shape[0] or cols > img.shape[1]:
        raise ValueError(f"target {target_dims} exceeds source {img.shape}")
    if (rows, cols) == img.shape:
        return img.copy()
    out = resize(img, (rows, cols))
    return np.clip(out, img.min(), img.max())


def scaled_dims(shape: tuple[int, int], scale: tuple[float, float]) -> tuple[int, int]:
    return tuple(max(1, int(round(n * s))) for n, s in zip(shape, scale))


def downsample_psf(psf: Psf, scale: float) -> Psf:
    """Shrink a PSF by ``scale`` (< 1) keeping an odd, centred grid and unit energy."""
    ny, nx = psf.shape
    ty = max(1, int(round(ny * scale)) | 1)
    tx = max(1, int(round(nx * scale)) | 1)
    vals = resize(psf.values, (min(ty, ny), min(tx, nx)))
    vals = np.clip(vals, 0.0, None)
    pitch = (psf.pitch[0] * nx / vals.shape[1], psf.pitch[1] * ny / vals.shape[0])
    return Psf(vals, pitch, psf.wavelength, False, psf.raw_energy).normalized()


@dataclass
class SampleResult:
    spec: SampleSpec
    coded: SensorImage  # full sensor resolution
    coded_work: np.ndarray  # downsampled counts (float)
    truth: np.ndarray  # full-resolution radiance crop
    truth_work: np.ndarray
    irradiance: Irradiance
    irradiance_work: np.ndarray  # uncropped background irradiance, downsampled
    meta: dict = field(default_factory=dict)


def sample_sensor(sensor: SensorModel, spec: SampleSpec) -> SensorModel:
    return replace(
        sensor,
        read_noise_mean=spec.read_noise_mean,
        read_noise_std=spec.read_noise_std,
        dark_current_mean=spec.dark_current_mean,
    )


def synthesize_sample(
    spec: SampleSpec,
    psfs_b: PsfPair,
    psfs_l: PsfPair,
    sensor: SensorModel,
    optics: OpticsConfig,
    scene: np.ndarray,
    work_dims: tuple[int, int] = (256, 256),
    switches: NoiseSwitches = NoiseSwitches(),
    photon_law: str = "modulated-std",
) -> SampleResult:
    """Run the forward and sensor models for one resolved sample.

    ``scene`` is the full radiance image; ``spec.crop_rect`` selects the part
    seen by the sensor.
    """
    x0, y0, w, h = spec.crop_rect
    if x0 < 0 or y0 < 0 or y0 + h > scene.shape[0] or x0 + w > scene.shape[1]:
        raise DataIOError(f"crop {spec.crop_rect} exceeds scene bounds {scene.shape[::-1]}")
    truth = np.asarray(scene[y0 : y0 + h, x0 : x0 + w], dtype=np.float64)
    sensor = sample_sensor(sensor, spec)
    i_sat_b = saturation_irradiance(sensor, optics.lambda_b, spec.exposure)
    i_sat_l = saturation_irradiance(sensor, optics.lambda_l, spec.exposure)
    irr = form_irradiance(
        truth,
        LaserParams(spec.alpha_l, spec.direction),
        psfs_b.coded,
        psfs_l.coded,
        psfs_b.uncoded,
        psfs_l.uncoded,
        spec.alpha_b,
        i_sat_b,
        i_sat_l,
        optics.focal_length,
    )
    photon = PhotonModel(spec.c1, spec.c2, photon_law)
    frame = simulate_frame(
        irr.background, irr.laser, optics.lambda_b, optics.lambda_l,
        spec.exposure, sensor, photon, spec.seed, switches,
    )
    scale = (work_dims[0] / h, work_dims[1] / w)
    coded_work = downsample_antialiased(frame.counts.astype(np.float64), work_dims)
    truth_work = downsample_antialiased(truth, work_dims)
    irr_work = downsample_antialiased(irr.background, scaled_dims(irr.background.shape, scale))
    # counts per unit radiance along the uncoded path, and the dark offset
    counts_per_radiance = (
        irr.scene_scale * optics.lambda_b * spec.exposure * sensor.pixel_pitch**2
        / (PLANCK * LIGHT_SPEED) * sensor.quantum_efficiency * sensor.gain
    )
    meta = {
        "scene_scale": irr.scene_scale,
        "laser_scale": irr.laser_scale,
        "laser_energy": float(irr.laser.sum() * irr.pitch**2),
        "background_energy": float(irr.background.sum() * irr.pitch**2),
        "i_sat_b": i_sat_b,
        "i_sat_l": i_sat_l,
        "counts_per_radiance": counts_per_radiance,
        "dark_offset_counts": spec.read_noise_mean * sensor.gain,
        "saturated_fraction": float(np.mean(frame.counts >= math.floor(sensor.full_well * sensor.gain))),
        "irradiance_shape": list(irr.background.shape),
    }
    frame.meta = meta
    return SampleResult(spec, frame, coded_work, truth, truth_work, irr, irr_work, meta)


def restoration_pad(psf_side_work: int, work_dims: tuple[int, int], padded_dims: tuple[int, int]) -> int:
    """Zero-pad per side for restoration input: configured pad, at least the PSF support."""
    configured = min((p - w) // 2 for p, w in zip(padded_dims, work_dims))
    return max(configured, int(psf_side_work))


def sha256_bytes(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_sample(result: SampleResult, index: int, out_dir: Path, pixel_pitch_work: float,
                 wavelength: float, extra: dict | None = None, stem: str | None = None) -> dict:
    """Write coded/truth PNGs, irradiance ADPF and the JSON sidecar; return the manifest record."""
    out_dir = Path(out_dir)
    stem = stem or f"{index:06d}"
    s_sat = 2 ** result.coded.bpc - 1
    coded_png = aio.encode_png16(np.clip(np.rint(result.coded_work), 0, s_sat).astype(np.uint16))
    truth_png = aio.encode_png16(np.rint(np.clip(result.truth_work, 0, 1) * 65535).astype(np.uint16))
    irr_blob = aio.encode_adpf(result.irradiance_work, pixel_pitch_work, wavelength)
    files = {
        "coded": (f"{stem}_coded.png", coded_png),
        "truth": (f"{stem}_truth.png", truth_png),
        "irradiance": (f"{stem}_irradiance.adpf", irr_blob),
    }
    sidecar = {"index": index, "spec": result.spec.to_dict(), "meta": result.meta}
    if extra:
        sidecar.update(extra)
    sidecar_blob = (json.dumps(sidecar, sort_keys=True, indent=2) + "\n").encode()
    files["sidecar"] = (f"{stem}.json", sidecar_blob)
    record = {"index": index, "spec": result.spec.to_dict(), "files": {}}
    try:
        for key, (name, blob) in files.items():
            (out_dir / name).write_bytes(blob)
            record["files"][key] = {"path": name, "sha256": sha256_bytes(blob)}
    except OSError as exc:
        raise DataIOError(f"cannot write sample {index}: {exc}") from exc
    return record


# Worker state for the process pool; set once per worker by _init_worker.
_WORKER: dict = {}


def _init_worker(state: dict) -> None:
    _WORKER.clear()
    _WORKER.update(state)


def _run_index(index: int) -> dict:
    w = _WORKER
    spec = w["specs"][index]
    scene = w["store"].load(spec.scene_id)
    result = synthesize_sample(
        spec, w["psfs_b"], w["psfs_l"], w["sensor"], w["optics"], scene,
        w["dataset"].work_dims, w["switches"], w["photon_law"],
    )
    return write_sample(result, index, w["out_dir"], w["work_pitch"], w["optics"].lambda_b, w["extra"])


def synthesize_dataset(
    count: int,
    master_seed: int,
    out_dir,
    store: SceneStore,
    optics: OpticsConfig,
    sensor: SensorModel,
    dataset: DatasetConfig,
    psfs_b: PsfPair,
    psfs_l: PsfPair | None = None,
    jobs: int = 1,
    switches: NoiseSwitches = NoiseSwitches(),
    photon_law: str = "modulated-std",
) -> tuple[Path, str]:
    """Synthesize ``count`` samples; returns the manifest path and its SHA-256.

    Output bytes depend only on the inputs and ``master_seed``; ``jobs`` only
    changes how the work is spread over processes.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataIOError(f"cannot create {out_dir}: {exc}") from exc
    psfs_l = psfs_l or psfs_b
    scenes = store.info()
    specs = [sample_spec(dataset, i, master_seed, scenes, sensor, optics.focal_length) for i in range(count)]

    h_s, w_s = sensor.shape
    scale = dataset.work_dims[1] / w_s
    work_pitch = sensor.pixel_pitch * w_s / dataset.work_dims[1]
    psf_work = downsample_psf(psfs_b.coded, scale)
    psf0_work = downsample_psf(psfs_b.uncoded, scale)
    pad = restoration_pad(psf_work.shape[0], dataset.work_dims, dataset.padded_dims)
    shared = {
        "psf_coded": ("psf_coded.adpf", aio.encode_adpf(psf_work.values, work_pitch, optics.lambda_b)),
        "psf_uncoded": ("psf_uncoded.adpf", aio.encode_adpf(psf0_work.values, work_pitch, optics.lambda_b)),
    }
    header = {
        "kind": "header",
        "count": count,
        "master_seed": master_seed,
        "work_dims": list(dataset.work_dims),
        "pad_per_side": pad,
        "work_pitch": work_pitch,
        "files": {},
    }
    for key, (name, blob) in shared.items():
        (out_dir / name).write_bytes(blob)
        header["files"][key] = {"path": name, "sha256": sha256_bytes(blob)}

    extra = {"pad_per_side": pad, "work_pitch": work_pitch}
    state = {
        "specs": specs, "store": store, "psfs_b": psfs_b, "psfs_l": psfs_l,
        "sensor": sensor, "optics": optics, "dataset": dataset, "switches": switches,
        "out_dir": out_dir, "work_pitch": work_pitch, "extra": extra, "photon_law": photon_law,
    }
    if jobs <= 1 or count <= 1:
        _init_worker(state)
        records = [_run_index(i) for i in range(count)]
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(state,)) as pool:
            records = list(pool.map(_run_index, range(count)))

    lines = [_canonical_json(header)] + [_canonical_json(r) for r in records]
    blob = ("\n".join(lines) + "\n").encode()
    manifest = out_dir / "manifest.jsonl"
    manifest.write_bytes(blob)
    return manifest, sha256_bytes(blob)


def pad_for_restoration(img: np.ndarray, pad: int) -> np.ndarray:
    return np.pad(np.asarray(img, dtype=np.float64), pad, mode="constant")


def default_jobs() -> int:
    return max(1, os.cpu_count() or 1)
