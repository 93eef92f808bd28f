from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.config import settings
from app.utils.logger import setup_logger

logger = setup_logger("schemas")


class ValueKind(str, Enum):
    """What a model file stores per node; internal state is always squared slowness."""

    VELOCITY = "velocity_mps"
    SLOWNESS_SQ = "slowness_sq"


class InnerSolver(str, Enum):
    RSGN_CG = "rsgn-cg"
    FSGN_GMRES_EXACT = "fsgn-gmres-exact"
    FSGN_GMRES_ILU = "fsgn-gmres-ilu"


class WeightMode(str, Enum):
    IDENTITY = "identity"
    OFFSET = "offset"


class EpsilonMode(str, Enum):
    ABSOLUTE = "absolute"
    RELATIVE = "relative"


# Model file header
class ModelHeader(BaseModel):
    model_config = ConfigDict(frozen=True)

    nx: int = Field(..., ge=3, description="Nodes along x (fastest index).")
    nz: int = Field(..., ge=3, description="Nodes along z.")
    h: float = Field(..., gt=0, description="Grid spacing in meters.")
    n_pml: int = Field(default=0, ge=0, description="PML thickness in nodes per side.")
    kind: ValueKind = Field(
        default=ValueKind.SLOWNESS_SQ, description="Stored quantity per node."
    )

    @property
    def n_nodes(self) -> int:
        return self.nx * self.nz


# Survey file models
class SourceSpec(BaseModel):
    position: tuple[int, int] = Field(..., description="Source node (i, j).")
    receivers: list[tuple[int, int]] = Field(
        ..., min_length=1, description="Receiver nodes (i, j) recording this source."
    )
    amplitude: float = Field(default=1.0, description="Point-load amplitude.")


class SurveySpec(BaseModel):
    """Acquisition geometry as stored in a survey JSON file."""

    frequencies_hz: list[float] = Field(
        ..., min_length=1, description="Frequencies to simulate, in Hz."
    )
    sources: list[SourceSpec] = Field(..., min_length=1)
    weight_mode: WeightMode = Field(
        default=WeightMode.IDENTITY,
        description="Data weighting: identity, or proportional to source-receiver offset.",
    )

    @field_validator("frequencies_hz")
    @classmethod
    def check_frequencies(cls, v: list[float]) -> list[float]:
        if any(f <= 0 for f in v):
            raise ValueError("frequencies must be positive")
        return v


# Inversion configuration
class FwiConfig(BaseModel):
    """
    Configuration of a multi-frequency Gauss-Newton run.

    Epsilon comes from `epsilon_values` when given, otherwise it ramps linearly
    from `epsilon_start` to `epsilon_end` across the frequency list.
    """

    frequencies_hz: list[float] = Field(
        ..., min_length=1, description="Ascending frequencies, one GN step each."
    )
    epsilon_start: float = Field(default=10.0, gt=0)
    epsilon_end: float = Field(default=1e5, gt=0)
    epsilon_values: list[float] | None = Field(
        default=None, description="Explicit epsilon per frequency."
    )
    epsilon_mode: EpsilonMode = Field(
        default=EpsilonMode.ABSOLUTE,
        description="'relative' scales epsilon by the largest eigenvalue of the data Hessian.",
    )
    inner_solver: InnerSolver = Field(default=InnerSolver.FSGN_GMRES_ILU)
    inner_maxit: int = Field(default=settings.inner_max_iterations, gt=0)
    inner_tol: float = Field(default=settings.inner_tolerance, gt=0)
    ilu_level: int = Field(default=settings.ilu_level, ge=0)
    gmres_restart: int = Field(default=settings.gmres_restart, gt=0)
    e_cg_stride: int = Field(default=settings.e_cg_stride, ge=0)
    drop_model_term: bool = Field(
        default=True,
        description="Drop the -epsilon*s_n term from the gradient; keeping it pulls "
        "unilluminated nodes toward zero slowness.",
    )
    weight_mode: WeightMode | None = Field(
        default=None, description="Overrides the survey's weight mode when set."
    )
    slowness_min: float | None = Field(default=None, gt=0)
    slowness_max: float | None = Field(default=None, gt=0)

    @field_validator("frequencies_hz")
    @classmethod
    def check_frequencies(cls, v: list[float]) -> list[float]:
        if any(f <= 0 for f in v):
            raise ValueError("frequencies must be positive")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("frequencies must be strictly ascending")
        return v

    @model_validator(mode="after")
    def check_schedule(self) -> "FwiConfig":
        if self.epsilon_values is not None:
            if len(self.epsilon_values) != len(self.frequencies_hz):
                raise ValueError(
                    f"epsilon_values has {len(self.epsilon_values)} entries for "
                    f"{len(self.frequencies_hz)} frequencies"
                )
            if any(e <= 0 for e in self.epsilon_values):
                raise ValueError("epsilon values must be positive")
        if (
            self.slowness_min is not None
            and self.slowness_max is not None
            and self.slowness_min >= self.slowness_max
        ):
            raise ValueError("slowness_min must be below slowness_max")
        explicit = self.model_fields_set
        if self.inner_solver is not InnerSolver.FSGN_GMRES_ILU and "ilu_level" in explicit:
            logger.warning(
                f"ilu_level is ignored by inner solver '{self.inner_solver.value}'"
            )
        return self

    def epsilon_schedule(self) -> list[float]:
        """Epsilon for each frequency, linear in epsilon itself."""
        if self.epsilon_values is not None:
            return list(self.epsilon_values)
        m = len(self.frequencies_hz)
        if m == 1:
            return [self.epsilon_start]
        step = (self.epsilon_end - self.epsilon_start) / (m - 1)
        return [self.epsilon_start + step * i for i in range(m)]


# Reports
class FrequencyReport(BaseModel):
    frequency_index: int
    frequency_hz: float
    epsilon: float = Field(..., description="Absolute epsilon used at this step.")
    resid_norm_ini: float
    resid_norm_fin: float
    inner_solver: InnerSolver
    inner_iterations: int
    inner_converged: bool
    inner_time: float = Field(..., description="Setup plus solve wall time, seconds.")
    update_norm_ratio: float = Field(..., description="||delta_s|| / ||s||.")
    snapshot_path: str | None = None


class FwiReport(BaseModel):
    """Per-frequency results in processing order; partial when a step failed."""

    entries: list[FrequencyReport] = Field(default_factory=list)
    failed_frequency_index: int | None = None
    failure_message: str | None = None
    total_time: float = 0.0

    @property
    def completed(self) -> bool:
        return self.failed_frequency_index is None


class SolverSummary(BaseModel):
    """One column of the solver comparison table."""

    solver: str
    iterations: int
    time_per_iteration: float
    ilu_setup_time: float
    total_time: float
    converged: bool
    final_e_cg: float | None = None
