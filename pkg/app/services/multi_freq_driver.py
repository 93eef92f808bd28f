"""
Frequency continuation: one Gauss-Newton step per frequency, ascending, each
starting from the model produced by the previous one.
"""

import time
from collections.abc import Callable, Mapping

import numpy as np

from app.errors import FwiError, GridError, InversionError, SurveyError
from app.schemas import EpsilonMode, FrequencyReport, FwiConfig, FwiReport, InnerSolver
from app.services.forward_problem import (
    DataVector,
    Survey,
    WeightMatrix,
    build_weights,
    observe,
    relative_misfit,
    solve_forward,
)
from app.services.full_space_kkt import PrecondMode, fsgn_gmres_step
from app.services.grid_pml import PmlProfile
from app.services.helmholtz_assembly import SlownessModel, assemble_helmholtz
from app.services.process_callback import ProgressCallback
from app.services.reduced_space import (
    GnState,
    build_gn_state,
    largest_data_eigenvalue,
    rsgn_cg_step,
)
from app.services.sparse_la import ConvergenceLog
from app.utils.logger import setup_logger

logger = setup_logger("multi_freq_driver")

SnapshotWriter = Callable[[int, float, SlownessModel], str | None]


def _bounded(model: SlownessModel, config: FwiConfig) -> SlownessModel:
    lower = config.slowness_min if config.slowness_min is not None else model.lower
    upper = config.slowness_max if config.slowness_max is not None else model.upper
    return SlownessModel(model.grid, model.values, lower=lower, upper=upper)


def resolve_epsilon(state: GnState, epsilon: float, config: FwiConfig) -> float:
    """Absolute epsilon for this step; relative mode scales by the data-Hessian norm."""
    if config.epsilon_mode is EpsilonMode.ABSOLUTE:
        return float(epsilon)
    scale = largest_data_eigenvalue(state)
    if scale <= 0.0:
        logger.warning("Data Hessian vanishes; using the relative epsilon as absolute")
        return float(epsilon)
    return float(epsilon * scale)


def _solve_inner(state: GnState, config: FwiConfig) -> tuple[np.ndarray, ConvergenceLog]:
    match config.inner_solver:
        case InnerSolver.RSGN_CG:
            return rsgn_cg_step(
                state,
                tol=config.inner_tol,
                maxit=config.inner_maxit,
                e_cg_stride=config.e_cg_stride,
                drop_model_term=config.drop_model_term,
            )
        case InnerSolver.FSGN_GMRES_EXACT | InnerSolver.FSGN_GMRES_ILU:
            mode = (
                PrecondMode.EXACT
                if config.inner_solver is InnerSolver.FSGN_GMRES_EXACT
                else PrecondMode.ILU
            )
            return fsgn_gmres_step(
                state,
                mode=mode,
                restart=config.gmres_restart,
                tol=config.inner_tol,
                maxit=config.inner_maxit,
                ilu_level=config.ilu_level,
                e_cg_stride=config.e_cg_stride,
                drop_model_term=config.drop_model_term,
            )
    raise ValueError(f"unknown inner solver {config.inner_solver}")


def _gn_step_from_state(
    state: GnState, config: FwiConfig
) -> tuple[SlownessModel, ConvergenceLog, np.ndarray]:
    delta_s, log = _solve_inner(state, config)
    model = _bounded(state.model, config)
    try:
        updated = model.clamped(model.values + delta_s)
    except GridError as e:
        frequency_hz = state.omega / (2.0 * np.pi)
        raise GridError(
            f"GN update at {frequency_hz:g} Hz after {log.iterations} "
            f"{log.solver} iterations, ||delta_s|| {np.linalg.norm(delta_s):.3e}: {e}"
        ) from e
    return updated, log, delta_s


def gn_step(
    model: SlownessModel,
    survey: Survey,
    frequency_hz: float,
    d_obs: DataVector,
    epsilon: float,
    config: FwiConfig,
    weights: WeightMatrix | None = None,
    profile: PmlProfile | None = None,
) -> tuple[SlownessModel, ConvergenceLog]:
    """Linearize at `model`, solve for delta_s and return the clamped update."""
    state = build_gn_state(model, survey, frequency_hz, d_obs, epsilon, weights, profile)
    state = state.with_epsilon(resolve_epsilon(state, epsilon, config))
    updated, log, _ = _gn_step_from_state(state, config)
    return updated, log


def simulate_data(
    model: SlownessModel,
    survey: Survey,
    frequency_hz: float,
    profile: PmlProfile | None = None,
) -> DataVector:
    profile = profile or PmlProfile.default(survey.grid)
    operator = assemble_helmholtz(survey.grid, profile, model, 2.0 * np.pi * frequency_hz)
    return observe(solve_forward(operator, survey), survey)


def _observed_at(observed: Mapping[float, DataVector], frequency_hz: float) -> DataVector:
    for key, data in observed.items():
        if np.isclose(key, frequency_hz, rtol=1e-12, atol=0.0):
            return data
    raise SurveyError(f"no observed data at {frequency_hz:g} Hz")


def fwi_run(
    config: FwiConfig,
    survey: Survey,
    observed: Mapping[float, DataVector],
    initial: SlownessModel,
    profile: PmlProfile | None = None,
    progress_callback: ProgressCallback | None = None,
    snapshot_writer: SnapshotWriter | None = None,
) -> tuple[FwiReport, SlownessModel]:
    """
    Run one GN step per configured frequency and report misfits.

    A failing step stops the run; the report then keeps the completed entries and
    names the failing frequency index. Returns the report and the last model.
    """
    progress_callback = progress_callback or ProgressCallback([])
    profile = profile or PmlProfile.default(survey.grid)
    weight_mode = config.weight_mode
    weights = build_weights(survey, weight_mode) if weight_mode is not None else None
    data = [_observed_at(observed, f) for f in config.frequencies_hz]
    schedule = config.epsilon_schedule()

    report = FwiReport()
    model = _bounded(initial, config)
    run_start = time.perf_counter()
    n_freq = len(config.frequencies_hz)

    for index, (frequency_hz, d_obs, epsilon) in enumerate(
        zip(config.frequencies_hz, data, schedule, strict=True)
    ):
        progress_callback.report(
            f"Gauss-Newton step {index + 1}/{n_freq} at {frequency_hz:g} Hz",
            "gn_step",
            {"frequency_index": index, "frequency_hz": frequency_hz},
        )
        try:
            step_start = time.perf_counter()
            state = build_gn_state(model, survey, frequency_hz, d_obs, epsilon, weights, profile)
            state = state.with_epsilon(resolve_epsilon(state, epsilon, config))
            resid_ini = state.resid_norm
            updated, log, delta_s = _gn_step_from_state(state, config)
            resid_fin = relative_misfit(
                simulate_data(updated, survey, frequency_hz, profile), d_obs
            )
            step_time = time.perf_counter() - step_start
        except FwiError as e:
            error = e if isinstance(e, InversionError) else InversionError(str(e), index)
            logger.error(f"Inversion stopped: {error}", exc_info=False)
            report.failed_frequency_index = index
            report.failure_message = str(error)
            break

        snapshot_path = snapshot_writer(index, frequency_hz, updated) if snapshot_writer else None
        model_norm = float(np.linalg.norm(model.values))
        entry = FrequencyReport(
            frequency_index=index,
            frequency_hz=frequency_hz,
            epsilon=state.epsilon,
            resid_norm_ini=resid_ini,
            resid_norm_fin=resid_fin,
            inner_solver=config.inner_solver,
            inner_iterations=log.iterations,
            inner_converged=log.converged,
            inner_time=log.total_time,
            update_norm_ratio=float(np.linalg.norm(delta_s)) / model_norm,
            snapshot_path=snapshot_path,
        )
        report.entries.append(entry)
        logger.info(
            f"{frequency_hz:g} Hz: misfit {resid_ini:.4e} -> {resid_fin:.4e}, "
            f"eps={state.epsilon:.3e}, {log.iterations} inner iterations, {step_time:.2f}s"
        )
        model = updated

    report.total_time = time.perf_counter() - run_start
    progress_callback.report(
        f"Inversion finished with {len(report.entries)}/{n_freq} frequencies",
        "done",
        {"completed": report.completed},
    )
    return report, model
