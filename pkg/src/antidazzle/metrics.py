"""Full-reference quality metrics: MSE, PSNR, SSIM and MS-SSIM."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

SCHEMA_VERSION = "1.0"
MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


@dataclass(frozen=True)
class WindowConfig:
    size: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 1.0

    @property
    def c1(self) -> float:
        return (self.k1 * self.data_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.data_range) ** 2


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"image dims differ: {x.shape} vs {y.shape}")
    if x.ndim != 2:
        raise ValueError("metrics expect 2-D grayscale images")
    return x, y


def mse_psnr(x, y) -> tuple[float, float]:
    """Mean squared error and PSNR (peak 1); identical images give ``inf``."""
    x, y = _pair(x, y)
    mse = float(np.mean((x - y) ** 2))
    psnr = math.inf if mse == 0 else 10.0 * math.log10(1.0 / mse)
    return mse, psnr


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    """Normalised 1-D Gaussian taps; ``size`` 1 gives the single tap 1."""
    if size < 1:
        raise ValueError("window size must be >= 1")
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r**2) / (2 * sigma**2)) if sigma > 0 else (r == 0).astype(float)
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Separable weighted window means over every fully contained window."""
    k = g.size
    rows = sliding_window_view(img, k, axis=0) @ g
    return sliding_window_view(rows, k, axis=1) @ g


def _ssim_maps(x, y, cfg: WindowConfig) -> tuple[np.ndarray, np.ndarray]:
    """Luminance and contrast-structure maps over valid windows."""
    if min(x.shape) < cfg.size:
        raise ValueError(f"image {x.shape} smaller than the {cfg.size}x{cfg.size} window")
    g = gaussian_window(cfg.size, cfg.sigma)
    mx = _filter_valid(x, g)
    my = _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    lum = (2 * mx * my + cfg.c1) / (mx * mx + my * my + cfg.c1)
    cs = (2 * sxy + cfg.c2) / (sxx + syy + cfg.c2)
    return lum, cs


def ssim(x, y, cfg: WindowConfig = WindowConfig()) -> float:
    """Mean SSIM over all valid Gaussian windows."""
    x, y = _pair(x, y)
    lum, cs = _ssim_maps(x, y, cfg)
    return float(np.mean(lum * cs))


def downsample2(img: np.ndarray) -> np.ndarray:
    """2x2 box average; odd trailing rows/columns are dropped."""
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    v = img[:h, :w]
    return 0.25 * (v[0::2, 0::2] + v[1::2, 0::2] + v[0::2, 1::2] + v[1::2, 1::2])


def msssim(x, y, cfg: WindowConfig = WindowConfig(), weights=MSSSIM_WEIGHTS) -> float:
    """Multi-scale SSIM: ``l_M^w_M * prod_j cs_j^w_j`` over ``len(weights)`` scales.

    Negative mean contrast-structure terms are clamped to zero before the
    fractional power.
    """
    x, y = _pair(x, y)
    n = len(weights)
    need = cfg.size * 2 ** (n - 1)
    if min(x.shape) < need:
        raise ValueError(f"image {x.shape} too small for {n} scales with window {cfg.size} (need {need})")
    score = 1.0
    for j, w in enumerate(weights):
        lum, cs = _ssim_maps(x, y, cfg)
        if j == n - 1:
            score *= max(float(np.mean(lum * cs)), 0.0) ** w
        else:
            score *= max(float(np.mean(cs)), 0.0) ** w
            x, y = downsample2(x), downsample2(y)
    return float(score)


@dataclass
class QualityReport:
    rows: list[dict] = field(default_factory=list)

    FIELDS = ("name", "mse", "one_minus_mse", "psnr_db", "ssim", "msssim", "lpips", "dists")

    def add(self, name: str, pred, truth, cfg: WindowConfig = WindowConfig()) -> dict:
        mse, psnr = mse_psnr(pred, truth)
        try:
            ms = msssim(pred, truth, cfg)
        except ValueError:
            ms = None  # too small for five scales
        row = {
            "name": name,
            "mse": mse,
            "one_minus_mse": 1.0 - mse,
            "psnr_db": psnr,
            "ssim": ssim(pred, truth, cfg),
            "msssim": ms,
            "lpips": None,
            "dists": None,
        }
        self.rows.append(row)
        return row

    def aggregate(self) -> dict:
        agg = {}
        for key in ("mse", "one_minus_mse", "psnr_db", "ssim", "msssim"):
            vals = [r[key] for r in self.rows if r[key] is not None]
            agg[key] = float(np.mean(vals)) if vals else None
        agg["count"] = len(self.rows)
        return agg

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "images": self.rows, "aggregate": self.aggregate()}

    def to_json(self) -> str:
        # PSNR of identical images is written as the JSON token Infinity
        return json.dumps(self.to_dict(), indent=2, allow_nan=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in self.rows:
            writer.writerow({k: ("" if r[k] is None else r[k]) for k in self.FIELDS})
        buf.write(f"# schema_version={SCHEMA_VERSION}\n")
        return buf.getvalue()
