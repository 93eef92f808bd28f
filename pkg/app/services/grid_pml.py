"""
Computational grid and PML coordinate stretching.

Node ordering is row-major with x fastest: node (i, j) with 0 <= i < nx and
0 <= j < nz has global index j * nx + i. All file formats use the same order.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np

from app.config import settings
from app.errors import GridError
from app.utils.logger import setup_logger

logger = setup_logger("grid_pml")

Axis = Literal["x", "z"]


@dataclass(frozen=True)
class Grid2D:
    """Uniform 2D grid with an `n_pml`-node absorbing layer on every side."""

    nx: int
    nz: int
    h: float
    n_pml: int = 0

    def __post_init__(self):
        if self.nx < 3 or self.nz < 3:
            raise GridError(f"grid needs nx, nz >= 3, got nx={self.nx}, nz={self.nz}")
        if not self.h > 0:
            raise GridError(f"grid spacing must be positive, got h={self.h}")
        if self.n_pml < 0:
            raise GridError(f"n_pml must be non-negative, got {self.n_pml}")
        if 2 * self.n_pml >= min(self.nx, self.nz):
            raise GridError(
                f"PML of {self.n_pml} nodes per side leaves no core in a "
                f"{self.nx}x{self.nz} grid"
            )

    @property
    def n_nodes(self) -> int:
        return self.nx * self.nz

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape (nz, nx) of a grid function reshaped row-major."""
        return (self.nz, self.nx)

    @property
    def core_shape(self) -> tuple[int, int]:
        return (self.nz - 2 * self.n_pml, self.nx - 2 * self.n_pml)

    def index(self, i: int, j: int) -> int:
        return j * self.nx + i

    def coords(self, node: int) -> tuple[int, int]:
        return node % self.nx, node // self.nx

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[0, :] = mask[-1, :] = True
        mask[:, 0] = mask[:, -1] = True
        return mask.ravel()

    @cached_property
    def core_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        p = self.n_pml
        mask[p : self.nz - p, p : self.nx - p] = True
        return mask.ravel()

    @property
    def boundary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask)

    @property
    def core_indices(self) -> np.ndarray:
        return np.flatnonzero(self.core_mask)

    @property
    def pml_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.core_mask)

    def is_core(self, i: int, j: int) -> bool:
        p = self.n_pml
        return p <= i < self.nx - p and p <= j < self.nz - p

    def is_boundary(self, i: int, j: int) -> bool:
        return i in (0, self.nx - 1) or j in (0, self.nz - 1)

    def core_view(self, values: np.ndarray) -> np.ndarray:
        """Reshape a grid function and cut out its core region."""
        p = self.n_pml
        return np.asarray(values).reshape(self.shape)[p : self.nz - p, p : self.nx - p]


def build_grid(nx: int, nz: int, h: float, n_pml: int) -> Grid2D:
    """
    Grid of nx by nz nodes at spacing h, with n_pml layers of PML on each side.

    The outermost ring of nodes is Dirichlet; invalid sizes raise GridError.
    """
    grid = Grid2D(nx=int(nx), nz=int(nz), h=float(h), n_pml=int(n_pml))
    logger.debug(
        f"Built grid {grid.nx}x{grid.nz}, h={grid.h}, n_pml={grid.n_pml}, "
        f"core {grid.core_shape[1]}x{grid.core_shape[0]}"
    )
    return grid


@dataclass(frozen=True)
class PmlProfile:
    """Polynomial damping ramp sigma(t) = sigma_max * t**power, t in [0, 1]."""

    sigma_max: float
    power: float = 2.0

    def __post_init__(self):
        if self.sigma_max < 0:
            raise GridError(f"sigma_max must be non-negative, got {self.sigma_max}")
        if self.power <= 0:
            raise GridError(f"PML power must be positive, got {self.power}")

    @classmethod
    def default(
        cls,
        grid: Grid2D,
        reference_velocity: float | None = None,
        target_reflection: float | None = None,
        power: float | None = None,
    ) -> "PmlProfile":
        """
        sigma_max = 3 * c_ref * ln(1 / R) / (2 * L_pml), L_pml = n_pml * h.

        An explicit FWI_PML_SIGMA_MAX setting wins over the derived value.
        """
        power = settings.pml_power if power is None else power
        if settings.pml_sigma_max is not None:
            return cls(sigma_max=settings.pml_sigma_max, power=power)
        if grid.n_pml == 0:
            return cls(sigma_max=0.0, power=power)
        c_ref = reference_velocity or settings.pml_reference_velocity
        reflection = target_reflection or settings.pml_target_reflection
        thickness = grid.n_pml * grid.h
        sigma_max = 3.0 * c_ref * np.log(1.0 / reflection) / (2.0 * thickness)
        return cls(sigma_max=float(sigma_max), power=power)


def _axis_length(grid: Grid2D, axis: Axis) -> int:
    if axis == "x":
        return grid.nx
    if axis == "z":
        return grid.nz
    raise GridError(f"unknown axis '{axis}'")


def normalized_depth(grid: Grid2D, axis: Axis, positions: np.ndarray) -> np.ndarray:
    """Depth into the PML scaled to [0, 1]; zero everywhere in the core."""
    n = _axis_length(grid, axis)
    positions = np.asarray(positions, dtype=float)
    if grid.n_pml == 0:
        return np.zeros_like(positions)
    low_edge = grid.n_pml
    high_edge = n - 1 - grid.n_pml
    depth = np.maximum(np.maximum(low_edge - positions, positions - high_edge), 0.0)
    return depth / grid.n_pml


def stretch_values(
    grid: Grid2D,
    profile: PmlProfile,
    axis: Axis,
    positions: np.ndarray,
    omega: float,
) -> np.ndarray:
    """Vectorized stretch 1 + i*sigma(t)/omega at (half-)node positions."""
    if not omega > 0:
        raise GridError(f"omega must be positive, got {omega}")
    positions = np.asarray(positions, dtype=float)
    n = _axis_length(grid, axis)
    if np.any(positions < 0) or np.any(positions > n - 1):
        raise GridError(f"stretch position outside [0, {n - 1}] on axis {axis}")
    if np.any(np.abs(2.0 * positions - np.round(2.0 * positions)) > 1e-12):
        raise GridError("stretch positions must be whole or half node indices")
    t = normalized_depth(grid, axis, positions)
    sigma = profile.sigma_max * t**profile.power
    values = np.ones(positions.shape, dtype=np.complex128)
    values.imag = sigma / omega
    return values


def stretch(
    grid: Grid2D, profile: PmlProfile, axis: Axis, position: float, omega: float
) -> complex:
    return complex(stretch_values(grid, profile, axis, np.array([position]), omega)[0])
