"""File formats: the ADPF float raster container and grayscale PNG.

ADPF layout (little-endian)::

    b"ADPF" | u8 version=1 | u8 dtype=1 (float32) | u32 width | u32 height
    | f64 pitch_m | f64 wavelength_m | float32[height * width] row-major
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataIOError

ADPF_MAGIC = b"ADPF"
ADPF_VERSION = 1
ADPF_FLOAT32 = 1
_HEADER = struct.Struct("<4sBBIIdd")


def encode_adpf(values: np.ndarray, pitch: float, wavelength: float) -> bytes:
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValueError("ADPF holds 2-D rasters only")
    height, width = arr.shape
    header = _HEADER.pack(ADPF_MAGIC, ADPF_VERSION, ADPF_FLOAT32, width, height, float(pitch), float(wavelength))
    return header + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def decode_adpf(blob: bytes) -> tuple[np.ndarray, float, float]:
    """Return ``(values, pitch_m, wavelength_m)`` from ADPF bytes."""
    if len(blob) < _HEADER.size:
        raise DataIOError("ADPF blob shorter than its header")
    magic, version, dtype, width, height, pitch, wavelength = _HEADER.unpack_from(blob)
    if magic != ADPF_MAGIC:
        raise DataIOError(f"bad ADPF magic {magic!r}")
    if version != ADPF_VERSION:
        raise DataIOError(f"unsupported ADPF version {version}")
    if dtype != ADPF_FLOAT32:
        raise DataIOError(f"unsupported ADPF dtype code {dtype}")
    expected = _HEADER.size + 4 * width * height
    if len(blob) != expected:
        raise DataIOError(f"ADPF payload size {len(blob)} != expected {expected}")
    values = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(height, width)
    return values.astype(np.float32), pitch, wavelength


def write_adpf(path, values: np.ndarray, pitch: float, wavelength: float) -> None:
    try:
        Path(path).write_bytes(encode_adpf(values, pitch, wavelength))
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc


def read_adpf(path) -> tuple[np.ndarray, float, float]:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    return decode_adpf(blob)


def encode_png16(counts: np.ndarray) -> bytes:
    arr = np.asarray(counts)
    if arr.ndim != 2:
        raise ValueError("PNG writer expects a 2-D grayscale array")
    if arr.size and (arr.min() < 0 or arr.max() > 65535):
        raise ValueError("16-bit PNG values must lie in [0, 65535]")
    img = Image.fromarray(np.ascontiguousarray(arr, dtype="<u2"))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def write_png16(path, counts: np.ndarray) -> bytes:
    blob = encode_png16(counts)
    try:
        Path(path).write_bytes(blob)
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc
    return blob


def read_png(path) -> np.ndarray:
    """Read an 8- or 16-bit grayscale (or colour, converted) PNG as integers."""
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(img, dtype=np.int64)
                return arr.astype(np.uint16)
            if mode != "L":
                img = img.convert("L")
            return np.asarray(img, dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise DataIOError(f"cannot read image {path}: {exc}") from exc


def read_radiance(path) -> np.ndarray:
    """Grayscale image scaled to [0, 1] by its bit depth."""
    arr = read_png(path)
    full = 65535.0 if arr.dtype == np.uint16 else 255.0
    return arr.astype(np.float64) / full
