"""
Assembly of the discrete PML Helmholtz operator and the P-blocks.

At an interior node (i, j) the 5-point stencil of the negative stretched
Laplacian uses the couplings

    x-neighbours:  Z_j / (h^2 X_{i±1/2})
    z-neighbours:  X_i / (h^2 Z_{j±1/2})

with the diagonal holding their sum minus omega^2 s_ij X_i Z_j. Boundary nodes
carry Dirichlet identity rows, and couplings into boundary columns are dropped
as well, which keeps A complex symmetric (real symmetric without PML).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from app.errors import DimensionMismatchError, GridError
from app.services.grid_pml import Grid2D, PmlProfile, stretch_values
from app.services.sparse_la.matrix import SparseMatrixCSR, diagonal_matrix
from app.utils.logger import setup_logger

logger = setup_logger("helmholtz_assembly")


@dataclass(frozen=True, eq=False)
class SlownessModel:
    """Squared slowness s = c^-2 (s^2/m^2) on every grid node."""

    grid: Grid2D
    values: np.ndarray
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if values.size != self.grid.n_nodes:
            raise DimensionMismatchError(
                f"model has {values.size} values, grid has {self.grid.n_nodes} nodes"
            )
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise GridError("squared slowness must be finite and positive everywhere")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_velocity(cls, grid: Grid2D, velocity: np.ndarray, **bounds) -> "SlownessModel":
        velocity = np.asarray(velocity, dtype=np.float64).ravel()
        if np.any(velocity <= 0):
            raise GridError("velocity must be positive everywhere")
        return cls(grid=grid, values=1.0 / velocity**2, **bounds)

    @property
    def velocity(self) -> np.ndarray:
        return 1.0 / np.sqrt(self.values)

    def with_values(self, values: np.ndarray) -> "SlownessModel":
        return SlownessModel(self.grid, values, lower=self.lower, upper=self.upper)

    def clamped(self, values: np.ndarray) -> "SlownessModel":
        """New model from `values` clipped to this model's bounds."""
        lower = -np.inf if self.lower is None else self.lower
        upper = np.inf if self.upper is None else self.upper
        return self.with_values(np.clip(values, lower, upper))


@dataclass(frozen=True, eq=False)
class HelmholtzOperator:
    A: SparseMatrixCSR
    omega: float
    grid: Grid2D
    profile: PmlProfile
    # X_i Z_j at every node; exactly 1 in the core
    mass_weights: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.grid.n_nodes


def assemble_helmholtz(
    grid: Grid2D, profile: PmlProfile, model: SlownessModel, omega: float
) -> HelmholtzOperator:
    if not omega > 0:
        raise GridError(f"omega must be positive, got {omega}")
    if model.grid != grid:
        raise DimensionMismatchError("slowness model is defined on a different grid")

    nx, nz, h2 = grid.nx, grid.nz, grid.h**2
    x_node = stretch_values(grid, profile, "x", np.arange(nx), omega)
    z_node = stretch_values(grid, profile, "z", np.arange(nz), omega)
    # Entry m holds the stretch at position m + 1/2
    x_half = stretch_values(grid, profile, "x", np.arange(nx - 1) + 0.5, omega)
    z_half = stretch_values(grid, profile, "z", np.arange(nz - 1) + 0.5, omega)

    jj, ii = np.meshgrid(np.arange(nz), np.arange(nx), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    nodes = jj * nx + ii
    interior = ~grid.boundary_mask
    ii, jj, nodes = ii[interior], jj[interior], nodes[interior]

    c_west = z_node[jj] / (h2 * x_half[ii - 1])
    c_east = z_node[jj] / (h2 * x_half[ii])
    c_south = x_node[ii] / (h2 * z_half[jj - 1])
    c_north = x_node[ii] / (h2 * z_half[jj])
    mass = x_node[ii] * z_node[jj]
    diagonal = c_west + c_east + c_south + c_north - omega**2 * model.values[nodes] * mass

    rows = [nodes, grid.boundary_indices]
    cols = [nodes, grid.boundary_indices]
    vals = [diagonal, np.ones(grid.boundary_indices.size, dtype=np.complex128)]
    for neighbour_i, neighbour_j, coupling in (
        (ii - 1, jj, c_west),
        (ii + 1, jj, c_east),
        (ii, jj - 1, c_south),
        (ii, jj + 1, c_north),
    ):
        neighbours = neighbour_j * nx + neighbour_i
        keep = ~grid.boundary_mask[neighbours]
        rows.append(nodes[keep])
        cols.append(neighbours[keep])
        vals.append(-coupling[keep])

    n = grid.n_nodes
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
        dtype=np.complex128,
    )
    A.sum_duplicates()
    A.sort_indices()

    logger.debug(
        f"Assembled Helmholtz operator n={n}, nnz={A.nnz}, omega={omega:.4f} rad/s"
    )
    return HelmholtzOperator(
        A=A,
        omega=float(omega),
        grid=grid,
        profile=profile,
        mass_weights=np.outer(z_node, x_node).ravel(),
    )


def p_diagonal(
    u_k: np.ndarray, omega: float, mass_weights: np.ndarray | None = None
) -> np.ndarray:
    """
    Diagonal of P_k = omega^2 I u_k.

    Inside a PML the derivative of A with respect to s also carries X Z; passing
    the operator's `mass_weights` makes P the exact derivative there. In the core
    the weights are 1 and both forms coincide.
    """
    u_k = np.asarray(u_k)
    values = omega**2 * u_k
    if mass_weights is not None:
        values = values * mass_weights
    return values


def assemble_p_block(
    u_k: np.ndarray, omega: float, mass_weights: np.ndarray | None = None
) -> SparseMatrixCSR:
    return diagonal_matrix(
        np.asarray(p_diagonal(u_k, omega, mass_weights), dtype=np.complex128)
    )
