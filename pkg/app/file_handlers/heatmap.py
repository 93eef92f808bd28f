"""
Raster heatmaps as binary PPM (P6), min-max scaled, with a sidecar range file.

Colormaps:
- grey: black at the minimum, white at the maximum
- seismic: blue at the minimum, white at the midpoint, red at the maximum
"""

from pathlib import Path

import numpy as np

from app.config import settings
from app.errors import FileFormatError
from app.utils.atomic_io import atomic_write_bytes, atomic_write_text
from app.utils.logger import setup_logger

logger = setup_logger("heatmap")

COLORMAPS = ("grey", "seismic")


def apply_colormap(t: np.ndarray, colormap: str) -> np.ndarray:
    """Map values in [0, 1] to uint8 RGB with shape t.shape + (3,)."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    if colormap == "grey":
        level = np.rint(255.0 * t)
        rgb = np.stack([level, level, level], axis=-1)
    elif colormap == "seismic":
        rising = np.minimum(2.0 * t, 1.0)
        falling = np.minimum(2.0 - 2.0 * t, 1.0)
        rgb = np.rint(255.0 * np.stack([rising, np.minimum(rising, falling), falling], axis=-1))
    else:
        raise ValueError(f"unknown colormap '{colormap}', expected one of {COLORMAPS}")
    return rgb.astype(np.uint8)


def encode_ppm(values: np.ndarray, colormap: str | None = None) -> tuple[bytes, float, float]:
    """PPM bytes for a 2D array (row 0 at the top) and the min/max used."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.size == 0:
        raise ValueError(f"heatmap needs a non-empty 2D array, got shape {values.shape}")
    colormap = colormap or settings.heatmap_colormap
    vmin, vmax = float(values.min()), float(values.max())
    t = (values - vmin) / (vmax - vmin) if vmax > vmin else np.full(values.shape, 0.5)
    rgb = apply_colormap(t, colormap)
    height, width = values.shape
    return f"P6\n{width} {height}\n255\n".encode("ascii") + rgb.tobytes(), vmin, vmax


def decode_ppm(raw: bytes) -> np.ndarray:
    """Pixels of a P6 file written by `encode_ppm`, shape (height, width, 3)."""
    parts = raw.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P6" or parts[2] != b"255":
        raise FileFormatError("not a binary PPM written by this tool", field="header")
    width, height = (int(v) for v in parts[1].split())
    pixels = np.frombuffer(parts[3], dtype=np.uint8)
    if pixels.size != width * height * 3:
        raise FileFormatError(
            f"PPM payload has {pixels.size} bytes, expected {width * height * 3}", field="data"
        )
    return pixels.reshape(height, width, 3)


def write_heatmap(path: str | Path, values: np.ndarray, colormap: str | None = None) -> Path:
    """Write the PPM and `<path>.range.txt` holding the scale endpoints."""
    colormap = colormap or settings.heatmap_colormap
    payload, vmin, vmax = encode_ppm(values, colormap)
    target = atomic_write_bytes(path, payload)
    atomic_write_text(
        target.with_name(target.name + ".range.txt"),
        f"min {vmin!r}\nmax {vmax!r}\ncolormap {colormap}\n",
    )
    logger.debug(f"Heatmap {target.name}: {values.shape[1]}x{values.shape[0]}, [{vmin:g}, {vmax:g}]")
    return target
