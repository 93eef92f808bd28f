"""
This file contains shared fixtures and configuration for the test suite.

Pytest will automatically discover and use the fixtures defined in this file.

The standard instance is a 12x12 grid with a 2-node PML, two sources and six
receivers, linearized at a homogeneous model while the data come from a model
with a Gaussian bump. Units are scaled so that h = 1 and c = 1, which keeps the
dense reference solves well conditioned.
"""

import numpy as np
import pytest

from app.services.forward_problem import DataVector, Survey
from app.services.grid_pml import Grid2D, PmlProfile, build_grid
from app.services.helmholtz_assembly import SlownessModel
from app.services.multi_freq_driver import simulate_data
from app.services.reduced_space import GnState, build_gn_state

STANDARD_FREQUENCY_HZ = 0.12
STANDARD_EPSILON = 1e-2


def gaussian_bump(grid: Grid2D, amplitude: float, width: float) -> np.ndarray:
    jj, ii = np.meshgrid(np.arange(grid.nz), np.arange(grid.nx), indexing="ij")
    ci, cj = (grid.nx - 1) / 2.0, (grid.nz - 1) / 2.0
    bump = np.exp(-((ii - ci) ** 2 + (jj - cj) ** 2) / (2.0 * width**2))
    return (1.0 + amplitude * bump).ravel()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def grid() -> Grid2D:
    return build_grid(12, 12, 1.0, 2)


@pytest.fixture(scope="session")
def profile(grid: Grid2D) -> PmlProfile:
    return PmlProfile.default(grid, reference_velocity=1.0, target_reflection=1e-3, power=2.0)


@pytest.fixture(scope="session")
def survey(grid: Grid2D) -> Survey:
    return Survey.from_coordinates(
        grid,
        sources=[(4, 4), (7, 4)],
        receivers=[[(3, 7), (5, 7), (7, 7)], [(4, 8), (6, 8), (8, 8)]],
        frequencies_hz=[STANDARD_FREQUENCY_HZ],
    )


@pytest.fixture(scope="session")
def empty_survey(grid: Grid2D) -> Survey:
    return Survey.from_coordinates(
        grid, sources=[(4, 4), (7, 4)], receivers=[[], []], allow_empty=True
    )


@pytest.fixture(scope="session")
def background_model(grid: Grid2D) -> SlownessModel:
    return SlownessModel(grid, np.ones(grid.n_nodes))


@pytest.fixture(scope="session")
def true_model(grid: Grid2D) -> SlownessModel:
    return SlownessModel(grid, gaussian_bump(grid, amplitude=0.2, width=1.5))


@pytest.fixture(scope="session")
def observed(true_model, survey, profile):
    return simulate_data(true_model, survey, STANDARD_FREQUENCY_HZ, profile)


@pytest.fixture(scope="session")
def gn_state(background_model, survey, observed, profile) -> GnState:
    return build_gn_state(
        background_model,
        survey,
        STANDARD_FREQUENCY_HZ,
        observed,
        STANDARD_EPSILON,
        profile=profile,
    )


@pytest.fixture(scope="session")
def empty_state(background_model, empty_survey, profile) -> GnState:
    return build_gn_state(
        background_model,
        empty_survey,
        STANDARD_FREQUENCY_HZ,
        DataVector(np.zeros(0)),
        STANDARD_EPSILON,
        profile=profile,
    )


def relative_error(actual, expected) -> float:
    actual, expected = np.asarray(actual), np.asarray(expected)
    scale = np.linalg.norm(expected)
    return float(np.linalg.norm(actual - expected) / (scale if scale > 0 else 1.0))
