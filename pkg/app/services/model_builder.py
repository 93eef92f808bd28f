"""
Synthetic and imported velocity models.

Builders work in velocity (m/s) on the full grid including the PML and return a
`SlownessModel`. Depth z grows with the row index j; x with the column index i.
"""

from collections.abc import Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d

from app.errors import FileFormatError, GridError
from app.services.grid_pml import Grid2D
from app.services.helmholtz_assembly import SlownessModel
from app.utils.logger import setup_logger

logger = setup_logger("model_builder")


def _node_coordinates(grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    """Physical (x, z) of every node as (nz, nx) arrays, origin at node (0, 0)."""
    z, x = np.meshgrid(np.arange(grid.nz) * grid.h, np.arange(grid.nx) * grid.h, indexing="ij")
    return x, z


def layered_model(
    grid: Grid2D, velocities: Sequence[float], interfaces_m: Sequence[float] = ()
) -> SlownessModel:
    """
    Horizontal layers: `velocities[0]` above `interfaces_m[0]`, and so on.

    Interface depths are in meters from the top row and must increase.
    """
    velocities = list(velocities)
    interfaces = list(interfaces_m)
    if not velocities:
        raise GridError("layered model needs at least one velocity")
    if len(interfaces) != len(velocities) - 1:
        raise GridError(
            f"{len(velocities)} layers need {len(velocities) - 1} interfaces, got {len(interfaces)}"
        )
    if any(b <= a for a, b in zip(interfaces, interfaces[1:])):
        raise GridError("layer interfaces must be strictly increasing")
    _, z = _node_coordinates(grid)
    layer = np.searchsorted(np.asarray(interfaces, dtype=float), z, side="right")
    velocity = np.asarray(velocities, dtype=float)[layer]
    return SlownessModel.from_velocity(grid, velocity)


def lens_model(
    grid: Grid2D,
    background: float,
    amplitude: float,
    center_m: tuple[float, float] | None = None,
    radius_m: float | None = None,
) -> SlownessModel:
    """Background velocity plus a Gaussian anomaly of peak `amplitude` (m/s)."""
    x, z = _node_coordinates(grid)
    if center_m is None:
        center_m = ((grid.nx - 1) * grid.h / 2.0, (grid.nz - 1) * grid.h / 2.0)
    if radius_m is None:
        radius_m = min(grid.core_shape) * grid.h / 6.0
    if radius_m <= 0:
        raise GridError(f"lens radius must be positive, got {radius_m}")
    r2 = (x - center_m[0]) ** 2 + (z - center_m[1]) ** 2
    velocity = background + amplitude * np.exp(-r2 / (2.0 * radius_m**2))
    return SlownessModel.from_velocity(grid, velocity)


def import_raw(
    payload: bytes, grid: Grid2D, x_fastest: bool = True, byte_order: str = "<"
) -> SlownessModel:
    """Wrap a headerless float32 velocity grid."""
    expected = grid.n_nodes * 4
    if len(payload) != expected:
        raise FileFormatError(
            f"raw model has {len(payload)} bytes, expected {expected} "
            f"({grid.nx}x{grid.nz} float32 values)",
            field="data",
        )
    velocity = np.frombuffer(payload, dtype=np.dtype(f"{byte_order}f4")).astype(np.float64)
    if not x_fastest:
        velocity = velocity.reshape(grid.nx, grid.nz).T
    if not np.all(np.isfinite(velocity)) or np.any(velocity <= 0):
        raise FileFormatError("raw model contains non-positive or non-finite velocities")
    return SlownessModel.from_velocity(grid, velocity.ravel())


def smooth_vertically(model: SlownessModel, sigma_m: float) -> SlownessModel:
    """Gaussian smoothing of the velocity along depth with std `sigma_m` meters."""
    if sigma_m < 0:
        raise GridError(f"smoothing length must be non-negative, got {sigma_m}")
    if sigma_m == 0:
        return model
    grid = model.grid
    velocity = model.velocity.reshape(grid.shape)
    smoothed = gaussian_filter1d(velocity, sigma=sigma_m / grid.h, axis=0, mode="nearest")
    logger.debug(f"Smoothed model vertically with sigma={sigma_m} m")
    return SlownessModel.from_velocity(grid, smoothed, lower=model.lower, upper=model.upper)
