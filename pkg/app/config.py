"""
Centralized configuration management using pydantic-settings.
This module provides a single source of truth for solver and I/O defaults.
"""

from dotenv import load_dotenv
from pydantic import Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.utils.logger import setup_logger

load_dotenv(override=False)


logger = setup_logger("core_config")


class Settings(BaseSettings):
    """
    Engine settings managed by pydantic-settings.

    Experiment files (FwiConfig, survey JSON) and CLI flags take precedence over
    these values; they only supply defaults.
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
        env_prefix="",
    )

    # ===== Logging =====
    log_level: str = Field(
        default="INFO",
        alias="LOG_LEVEL",
        description="Default log level for all engine loggers",
    )

    # ===== PML Configuration =====
    pml_power: float = Field(
        default=2.0,
        alias="FWI_PML_POWER",
        description="Polynomial order of the PML damping ramp",
    )

    pml_target_reflection: float = Field(
        default=1e-3,
        alias="FWI_PML_TARGET_REFLECTION",
        description="Target reflection coefficient used to derive sigma_max",
    )

    pml_reference_velocity: float = Field(
        default=2000.0,
        alias="FWI_PML_REFERENCE_VELOCITY",
        description="Reference speed c_ref (m/s) in the default sigma_max formula",
    )

    pml_sigma_max: float | None = Field(
        default=None,
        alias="FWI_PML_SIGMA_MAX",
        description="Explicit damping amplitude (1/s); overrides the derived default",
    )

    # ===== Krylov Solver Configuration =====
    gmres_restart: int = Field(
        default=30,
        alias="FWI_GMRES_RESTART",
        description="GMRes restart length (one cycle covers one Newton step budget)",
    )

    inner_tolerance: float = Field(
        default=1e-6,
        alias="FWI_INNER_TOLERANCE",
        description="Relative residual tolerance of the inner GN solvers",
    )

    inner_max_iterations: int = Field(
        default=30,
        alias="FWI_INNER_MAX_ITERATIONS",
        description="Iteration cap of the inner GN solvers",
    )

    e_cg_stride: int = Field(
        default=1,
        alias="FWI_E_CG_STRIDE",
        description="Evaluate E_cg on every n-th CG or GMRes iterate (each costs a Hessian action)",
    )

    # ===== ILU Configuration =====
    ilu_level: int = Field(
        default=2,
        alias="FWI_ILU_LEVEL",
        description="Default level of fill p for ILU(p)",
    )

    ilu_diagonal_shift: float = Field(
        default=0.0,
        alias="FWI_ILU_DIAGONAL_SHIFT",
        description="Diagonal shift added before ILU factorization (0 disables)",
    )

    # ===== Regularization =====
    power_iterations: int = Field(
        default=8,
        alias="FWI_POWER_ITERATIONS",
        description="Power iterations used to scale a relative epsilon",
    )

    # ===== Dense Oracle =====
    dense_guard_limit: int = Field(
        default=50_000,
        alias="FWI_DENSE_GUARD_LIMIT",
        description="Largest total KKT dimension the dense oracle accepts",
    )

    # ===== Output Configuration =====
    heatmap_colormap: str = Field(
        default="seismic",
        alias="FWI_HEATMAP_COLORMAP",
        description="Heatmap colormap: 'grey' or 'seismic'",
    )

    @model_validator(mode="after")
    def validate_settings(self) -> "Settings":
        """Log warnings for settings that are legal but unusual."""
        if not 0.0 < self.pml_target_reflection < 1.0:
            logger.warning(
                f"FWI_PML_TARGET_REFLECTION={self.pml_target_reflection} is outside (0, 1)."
            )
        if self.gmres_restart < 1:
            logger.warning("FWI_GMRES_RESTART < 1; falling back to 30.")
            self.gmres_restart = 30
        if self.heatmap_colormap not in ("grey", "seismic"):
            logger.warning(
                f"Unknown FWI_HEATMAP_COLORMAP '{self.heatmap_colormap}', using 'seismic'."
            )
            self.heatmap_colormap = "seismic"

        logger.debug(
            f"PML power={self.pml_power}, restart={self.gmres_restart}, "
            f"ILU level={self.ilu_level}"
        )
        return self


# Global settings instance
settings = Settings()
