"""
Multi-source forward simulation, the observation operator Q and data weights.

Data are concatenated source-major: all receivers of source 0, then of source 1,
and so on. `Survey.data_sources` and `Survey.data_nodes` give the source index and
grid node of every entry, so Q, Q* and the weights are plain fancy indexing.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from app.errors import DimensionMismatchError, SurveyError
from app.schemas import SurveySpec, WeightMode
from app.services.grid_pml import Grid2D
from app.services.helmholtz_assembly import HelmholtzOperator
from app.services.sparse_la import LuFactors, lu_factor, lu_solve
from app.utils.logger import setup_logger

logger = setup_logger("forward_problem")

FORWARD_RESIDUAL_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class Survey:
    """
    Point sources and their receivers on one grid.

    Every source and receiver must be a core node off the Dirichlet ring.
    Surveys without receivers are rejected unless `allow_empty` is set; they only
    make sense as degenerate test geometries.
    """

    grid: Grid2D
    sources: np.ndarray
    receivers: tuple[np.ndarray, ...]
    frequencies_hz: tuple[float, ...] = ()
    amplitudes: np.ndarray | None = None
    allow_empty: bool = False
    data_sources: np.ndarray = field(init=False, repr=False)
    data_nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        sources = np.asarray(self.sources, dtype=np.int64).ravel()
        receivers = tuple(np.asarray(r, dtype=np.int64).ravel() for r in self.receivers)
        if sources.size == 0:
            raise SurveyError("survey has no sources")
        if len(receivers) != sources.size:
            raise SurveyError(
                f"{sources.size} sources but {len(receivers)} receiver lists"
            )
        amplitudes = (
            np.ones(sources.size)
            if self.amplitudes is None
            else np.asarray(self.amplitudes, dtype=np.float64).ravel()
        )
        if amplitudes.size != sources.size:
            raise SurveyError(f"{amplitudes.size} amplitudes for {sources.size} sources")
        if any(f <= 0 for f in self.frequencies_hz):
            raise SurveyError("frequencies must be positive")

        self._check_nodes(sources, "source")
        for k, nodes in enumerate(receivers):
            self._check_nodes(nodes, f"receiver of source {k}")

        counts = np.array([r.size for r in receivers], dtype=np.int64)
        if counts.sum() == 0 and not self.allow_empty:
            raise SurveyError("survey has no receivers")

        object.__setattr__(self, "sources", sources)
        object.__setattr__(self, "receivers", receivers)
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "frequencies_hz", tuple(float(f) for f in self.frequencies_hz))
        object.__setattr__(
            self, "data_sources", np.repeat(np.arange(sources.size), counts)
        )
        object.__setattr__(
            self,
            "data_nodes",
            np.concatenate(receivers) if receivers else np.zeros(0, dtype=np.int64),
        )

    def _check_nodes(self, nodes: np.ndarray, label: str):
        grid = self.grid
        outside = (nodes < 0) | (nodes >= grid.n_nodes)
        if np.any(outside):
            raise SurveyError(f"{label} node {int(nodes[outside][0])} is not on the grid")
        bad = ~grid.core_mask[nodes] | grid.boundary_mask[nodes]
        if np.any(bad):
            i, j = grid.coords(int(nodes[bad][0]))
            raise SurveyError(f"{label} at ({i}, {j}) lies outside the core region")

    @classmethod
    def from_coordinates(
        cls,
        grid: Grid2D,
        sources: Sequence[tuple[int, int]],
        receivers: Sequence[Sequence[tuple[int, int]]],
        frequencies_hz: Sequence[float] = (),
        amplitudes: Sequence[float] | None = None,
        allow_empty: bool = False,
    ) -> "Survey":
        for i, j in [*sources, *(p for rec in receivers for p in rec)]:
            if not (0 <= i < grid.nx and 0 <= j < grid.nz):
                raise SurveyError(f"node ({i}, {j}) is outside the {grid.nx}x{grid.nz} grid")
        return cls(
            grid=grid,
            sources=np.array([grid.index(i, j) for i, j in sources], dtype=np.int64),
            receivers=tuple(
                np.array([grid.index(i, j) for i, j in rec], dtype=np.int64)
                for rec in receivers
            ),
            frequencies_hz=tuple(frequencies_hz),
            amplitudes=None if amplitudes is None else np.asarray(amplitudes),
            allow_empty=allow_empty,
        )

    @classmethod
    def from_spec(cls, grid: Grid2D, spec: SurveySpec) -> "Survey":
        return cls.from_coordinates(
            grid,
            sources=[s.position for s in spec.sources],
            receivers=[s.receivers for s in spec.sources],
            frequencies_hz=spec.frequencies_hz,
            amplitudes=[s.amplitude for s in spec.sources],
        )

    @property
    def n_sources(self) -> int:
        return int(self.sources.size)

    @property
    def n_data(self) -> int:
        return int(self.data_nodes.size)

    @property
    def receiver_counts(self) -> np.ndarray:
        return np.array([r.size for r in self.receivers], dtype=np.int64)

    def offsets(self) -> np.ndarray:
        """Source-receiver distance in meters for every data entry."""
        grid = self.grid
        src = self.sources[self.data_sources]
        dx = (self.data_nodes % grid.nx) - (src % grid.nx)
        dz = (self.data_nodes // grid.nx) - (src // grid.nx)
        return grid.h * np.hypot(dx, dz)


@dataclass(frozen=True, eq=False)
class Wavefield:
    """One complex grid function per source, stacked as a (K, n) array."""

    values: np.ndarray

    @property
    def n_sources(self) -> int:
        return self.values.shape[0]

    def source(self, k: int) -> np.ndarray:
        return self.values[k]


@dataclass(frozen=True, eq=False)
class DataVector:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.complex128).ravel())

    def __len__(self) -> int:
        return self.values.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Real non-negative diagonal W over the data entries."""

    diagonal: np.ndarray

    def __post_init__(self):
        diagonal = np.asarray(self.diagonal, dtype=np.float64).ravel()
        if np.any(diagonal < 0) or not np.all(np.isfinite(diagonal)):
            raise SurveyError("data weights must be finite and non-negative")
        object.__setattr__(self, "diagonal", diagonal)

    @property
    def squared(self) -> np.ndarray:
        return self.diagonal**2

    def apply(self, w: np.ndarray) -> np.ndarray:
        return self.diagonal * w


def source_matrix(survey: Survey) -> np.ndarray:
    """Right-hand sides f_k as columns: amplitude / h^2 at each source node."""
    grid = survey.grid
    f = np.zeros((grid.n_nodes, survey.n_sources), dtype=np.complex128)
    f[survey.sources, np.arange(survey.n_sources)] = survey.amplitudes / grid.h**2
    return f


def solve_forward(
    operator: HelmholtzOperator,
    survey: Survey,
    factors: LuFactors | None = None,
) -> Wavefield:
    """
    Solve A u_k = f_k for every source with one shared factorization.

    The factorization is computed when not supplied. All sources are solved as a
    single block right-hand side.
    """
    if operator.grid != survey.grid:
        raise DimensionMismatchError("operator and survey are defined on different grids")
    if factors is None:
        factors = lu_factor(operator.A)
    f = source_matrix(survey)
    u = lu_solve(factors, f)

    f_norms = np.linalg.norm(f, axis=0)
    nonzero = f_norms > 0
    if np.any(nonzero):
        residuals = np.linalg.norm(operator.A @ u - f, axis=0)[nonzero] / f_norms[nonzero]
        worst = float(residuals.max())
        if worst > FORWARD_RESIDUAL_TOLERANCE:
            logger.warning(
                f"Forward solve relative residual {worst:.2e} exceeds "
                f"{FORWARD_RESIDUAL_TOLERANCE:.0e} at omega={operator.omega:.3f}"
            )
    return Wavefield(values=np.ascontiguousarray(u.T))


def observe(u: Wavefield | np.ndarray, survey: Survey) -> DataVector:
    values = u.values if isinstance(u, Wavefield) else np.asarray(u)
    if values.shape != (survey.n_sources, survey.grid.n_nodes):
        raise DimensionMismatchError(
            f"wavefield shape {values.shape} does not match survey "
            f"({survey.n_sources}, {survey.grid.n_nodes})"
        )
    return DataVector(values[survey.data_sources, survey.data_nodes])


def observe_adjoint(w: DataVector | np.ndarray, survey: Survey) -> np.ndarray:
    """Q* w: scatter data values back to their receiver nodes, shape (K, n)."""
    values = w.values if isinstance(w, DataVector) else np.asarray(w)
    if values.size != survey.n_data:
        raise DimensionMismatchError(
            f"data vector has {values.size} entries, survey has {survey.n_data}"
        )
    out = np.zeros((survey.n_sources, survey.grid.n_nodes), dtype=np.complex128)
    np.add.at(out, (survey.data_sources, survey.data_nodes), values)
    return out


def residual(d_obs: DataVector, d_pred: DataVector) -> DataVector:
    if len(d_obs) != len(d_pred):
        raise DimensionMismatchError(
            f"observed data has {len(d_obs)} entries, predicted has {len(d_pred)}"
        )
    return DataVector(d_obs.values - d_pred.values)


def relative_misfit(d_pred: DataVector, d_obs: DataVector) -> float:
    """||d_pred - d_obs|| / ||d_obs||; the absolute norm when d_obs is zero."""
    r = residual(d_obs, d_pred).norm()
    obs_norm = d_obs.norm()
    return r / obs_norm if obs_norm > 0 else r


def build_weights(survey: Survey, mode: WeightMode | str = WeightMode.IDENTITY) -> WeightMatrix:
    mode = WeightMode(mode)
    if mode is WeightMode.IDENTITY:
        return WeightMatrix(np.ones(survey.n_data))
    offsets = survey.offsets()
    largest = offsets.max(initial=0.0)
    if largest == 0.0:
        raise SurveyError("offset weighting needs at least one receiver away from its source")
    return WeightMatrix(offsets / largest)
