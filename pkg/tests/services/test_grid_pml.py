import numpy as np
import pytest

from app.errors import GridError
from app.services.grid_pml import (
    Grid2D,
    PmlProfile,
    build_grid,
    normalized_depth,
    stretch,
    stretch_values,
)


def test_index_and_coords_are_inverse():
    grid = build_grid(7, 5, 10.0, 1)
    assert grid.index(3, 2) == 2 * 7 + 3
    for node in range(grid.n_nodes):
        assert grid.index(*grid.coords(node)) == node


def test_masks_partition_the_grid():
    grid = build_grid(10, 8, 5.0, 2)
    assert grid.boundary_indices.size == 2 * 10 + 2 * 8 - 4
    assert grid.core_indices.size == 6 * 4
    assert grid.core_indices.size + grid.pml_indices.size == grid.n_nodes
    assert grid.is_core(2, 2) and not grid.is_core(1, 2)
    assert grid.is_boundary(0, 3) and not grid.is_boundary(1, 1)
    assert grid.core_view(np.arange(grid.n_nodes)).shape == grid.core_shape


@pytest.mark.parametrize(
    "nx,nz,h,n_pml",
    [(2, 5, 1.0, 0), (5, 5, 0.0, 0), (5, 5, 1.0, -1), (10, 10, 1.0, 5)],
)
def test_invalid_grids_are_rejected(nx, nz, h, n_pml):
    with pytest.raises(GridError):
        Grid2D(nx=nx, nz=nz, h=h, n_pml=n_pml)


def test_stretch_is_one_in_the_core():
    grid = build_grid(20, 20, 10.0, 5)
    profile = PmlProfile(sigma_max=50.0)
    core = np.arange(5, 15)
    assert np.all(stretch_values(grid, profile, "x", core, omega=3.0) == 1.0)
    assert stretch(grid, profile, "z", 9.5, omega=3.0) == 1.0


def test_stretch_at_outer_edge_reaches_sigma_max():
    grid = build_grid(20, 16, 10.0, 4)
    profile = PmlProfile(sigma_max=40.0, power=2.0)
    omega = 8.0
    assert stretch(grid, profile, "x", 0, omega) == pytest.approx(1 + 5j)
    assert stretch(grid, profile, "z", 15, omega) == pytest.approx(1 + 5j)
    # half a node deep into a 4-node layer: t = 0.125
    assert stretch(grid, profile, "x", 3.5, omega).imag == pytest.approx(40.0 * 0.125**2 / omega)


def test_normalized_depth_is_symmetric():
    grid = build_grid(12, 12, 1.0, 3)
    positions = np.arange(0, 11.5, 0.5)
    depth = normalized_depth(grid, "x", positions)
    np.testing.assert_allclose(depth, depth[::-1])
    assert depth[0] == 1.0 and depth.min() == 0.0


def test_stretch_rejects_off_grid_positions():
    grid = build_grid(8, 8, 1.0, 2)
    profile = PmlProfile(sigma_max=1.0)
    with pytest.raises(GridError):
        stretch(grid, profile, "x", 0.25, 1.0)
    with pytest.raises(GridError):
        stretch(grid, profile, "z", 8.0, 1.0)
    with pytest.raises(GridError):
        stretch(grid, profile, "x", 1.0, 0.0)


def test_default_profile_uses_reflection_formula():
    grid = build_grid(30, 30, 10.0, 10)
    profile = PmlProfile.default(
        grid, reference_velocity=2000.0, target_reflection=1e-3, power=2.0
    )
    expected = 3.0 * 2000.0 * np.log(1e3) / (2.0 * 100.0)
    assert profile.sigma_max == pytest.approx(expected)


def test_default_profile_without_pml_has_no_damping():
    grid = build_grid(10, 10, 10.0, 0)
    assert PmlProfile.default(grid, reference_velocity=1500.0).sigma_max == 0.0
