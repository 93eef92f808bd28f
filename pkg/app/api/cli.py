"""
Command-line surface: make-model, simulate, compare-solvers, invert.

Each command returns a process exit code. Engine errors map to the exit code of
their category; anything unexpected is logged with its traceback and mapped to
the internal-error code.
"""

import argparse
import time
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from app.config import settings
from app.errors import (
    ErrorCategory,
    FileFormatError,
    FwiError,
    InversionError,
    SurveyError,
    UsageError,
)
from app.file_handlers import (
    read_data,
    read_fwi_config,
    read_model,
    read_survey,
    write_comparison,
    write_data,
    write_fwi_report,
    write_heatmap,
    write_model,
)
from app.schemas import FwiConfig, InnerSolver, ValueKind
from app.services.forward_problem import DataVector, Survey, build_weights
from app.services.full_space_kkt import PrecondMode, fsgn_gmres_step
from app.services.grid_pml import PmlProfile, build_grid
from app.services.helmholtz_assembly import SlownessModel
from app.services.model_builder import (
    import_raw,
    layered_model,
    lens_model,
    smooth_vertically,
)
from app.services.multi_freq_driver import fwi_run, resolve_epsilon, simulate_data
from app.services.process_callback import ProgressCallback, logging_callback
from app.services.reduced_space import build_gn_state, rsgn_cg_step
from app.utils.logger import setup_logger

logger = setup_logger("cli")


# ===== make-model =====
def cmd_make_model(args: argparse.Namespace) -> int:
    if args.kind == "smooth":
        if not args.input:
            raise UsageError("make-model smooth needs --input")
        source, header = read_model(args.input)
        model = smooth_vertically(source, args.sigma)
        kind = header.kind if args.value_kind is None else ValueKind(args.value_kind)
    else:
        if None in (args.nx, args.nz, args.h):
            raise UsageError(f"make-model {args.kind} needs --nx, --nz and --h")
        kind = ValueKind(args.value_kind or ValueKind.VELOCITY.value)
        grid = build_grid(args.nx, args.nz, args.h, args.n_pml)
        if args.kind == "layered":
            model = layered_model(grid, args.velocities, args.interfaces)
        elif args.kind == "lens":
            center = tuple(args.center) if args.center else None
            model = lens_model(grid, args.background, args.amplitude, center, args.radius)
        else:
            if not args.input:
                raise UsageError("make-model import-raw needs --input")
            try:
                payload = Path(args.input).read_bytes()
            except OSError as e:
                raise FileFormatError(f"cannot read raw model {args.input}: {e}") from e
            model = import_raw(payload, grid, x_fastest=not args.z_fastest)
    write_model(args.out, model, kind)
    velocity = model.velocity
    logger.info(
        f"Model {model.grid.nx}x{model.grid.nz} written to {args.out} "
        f"(velocity {velocity.min():.1f}-{velocity.max():.1f} m/s)"
    )
    return 0


# ===== simulate =====
def _simulate_all(
    model: SlownessModel, survey: Survey, frequencies: Sequence[float], profile: PmlProfile
) -> dict[float, DataVector]:
    data = {}
    for frequency_hz in frequencies:
        start = time.perf_counter()
        data[float(frequency_hz)] = simulate_data(model, survey, frequency_hz, profile)
        logger.info(f"Simulated {frequency_hz:g} Hz in {time.perf_counter() - start:.3f}s")
    return data


def cmd_simulate(args: argparse.Namespace) -> int:
    model, _ = read_model(args.model)
    survey, spec = read_survey(args.survey, model.grid)
    frequencies = args.frequencies or spec.frequencies_hz
    data = _simulate_all(model, survey, frequencies, PmlProfile.default(model.grid))
    write_data(args.out, survey, data)
    return 0


# ===== shared input loading =====
def _load_inversion_inputs(
    args: argparse.Namespace,
) -> tuple[SlownessModel, Survey, dict[float, DataVector], FwiConfig, PmlProfile]:
    initial, _ = read_model(args.initial)
    survey, spec = read_survey(args.survey, initial.grid)
    profile = PmlProfile.default(initial.grid)
    if args.config:
        config = read_fwi_config(args.config)
    else:
        config = FwiConfig(frequencies_hz=sorted(spec.frequencies_hz))
    if config.weight_mode is None:
        config = config.model_copy(update={"weight_mode": spec.weight_mode})

    overrides = {
        key: value
        for key, value in (
            ("inner_solver", args.inner_solver),
            ("inner_maxit", args.maxit),
            ("inner_tol", args.tol),
            ("ilu_level", args.ilu_level),
        )
        if value is not None
    }
    if args.drop_model_term is not None:
        overrides["drop_model_term"] = args.drop_model_term
    if overrides:
        config = FwiConfig.model_validate({**config.model_dump(), **overrides})

    if args.data:
        observed = read_data(args.data, survey)
    elif args.model:
        true_model, _ = read_model(args.model)
        if true_model.grid != initial.grid:
            raise SurveyError("true and initial models are on different grids")
        observed = _simulate_all(true_model, survey, config.frequencies_hz, profile)
    else:
        raise UsageError("either --data or --model is required")
    return initial, survey, observed, config, profile


# ===== compare-solvers =====
def cmd_compare_solvers(args: argparse.Namespace) -> int:
    initial, survey, observed, config, profile = _load_inversion_inputs(args)
    frequency_hz = args.frequency if args.frequency is not None else config.frequencies_hz[0]
    index = int(np.argmin(np.abs(np.asarray(config.frequencies_hz) - frequency_hz)))
    epsilon = args.epsilon if args.epsilon is not None else config.epsilon_schedule()[index]
    d_obs = next(
        (d for f, d in observed.items() if np.isclose(f, frequency_hz, rtol=1e-12, atol=0.0)),
        None,
    )
    if d_obs is None:
        raise SurveyError(f"no observed data at {frequency_hz:g} Hz")

    weights = build_weights(survey, config.weight_mode)
    state = build_gn_state(initial, survey, frequency_hz, d_obs, epsilon, weights, profile)
    state = state.with_epsilon(resolve_epsilon(state, epsilon, config))
    logger.info(
        f"Comparing solvers at {frequency_hz:g} Hz: n={state.n_nodes}, K={state.n_sources}, "
        f"N={survey.n_data}, eps={state.epsilon:.3e}, misfit {state.resid_norm:.4e}"
    )

    tol, maxit = config.inner_tol, config.inner_maxit
    common = {
        "restart": config.gmres_restart,
        "tol": tol,
        "maxit": maxit,
        "e_cg_stride": 1,
        "observer_tol": tol,
        "drop_model_term": config.drop_model_term,
    }
    results = [
        rsgn_cg_step(
            state,
            tol=tol,
            maxit=maxit,
            e_cg_stride=1,
            drop_model_term=config.drop_model_term,
        )
    ]
    results.append(fsgn_gmres_step(state, mode=PrecondMode.EXACT, **common))
    for level in args.ilu_levels or [config.ilu_level]:
        results.append(fsgn_gmres_step(state, mode=PrecondMode.ILU, ilu_level=level, **common))

    reference = results[0][0]
    reference_norm = float(np.linalg.norm(reference)) or 1.0
    for delta_s, log in results[1:]:
        difference = float(np.linalg.norm(delta_s - reference)) / reference_norm
        logger.info(f"{log.solver}: update differs from rsgn-cg by {difference:.3e} (relative)")
    write_comparison(args.out_dir, [log for _, log in results])
    return 0


# ===== invert =====
def cmd_invert(args: argparse.Namespace) -> int:
    initial, survey, observed, config, profile = _load_inversion_inputs(args)
    out_dir = Path(args.out_dir)
    grid = initial.grid

    def save_snapshot(index: int, frequency_hz: float, model: SlownessModel) -> str:
        stem = f"model_{index:02d}_{frequency_hz:g}Hz"
        path = write_model(out_dir / "snapshots" / f"{stem}.fwimodel", model)
        write_heatmap(out_dir / "heatmaps" / f"{stem}.ppm", grid.core_view(model.velocity))
        return str(path.relative_to(out_dir))

    write_heatmap(out_dir / "heatmaps" / "model_initial.ppm", grid.core_view(initial.velocity))
    report, final_model = fwi_run(
        config,
        survey,
        observed,
        initial,
        profile=profile,
        progress_callback=ProgressCallback([logging_callback]),
        snapshot_writer=save_snapshot,
    )
    write_fwi_report(out_dir, report)
    write_model(out_dir / "model_final.fwimodel", final_model)
    if not report.completed:
        raise InversionError(report.failure_message or "step failed", report.failed_frequency_index)
    logger.info(f"Inversion finished in {report.total_time:.2f}s; outputs in {out_dir}")
    return 0


# ===== parser =====
def _add_inversion_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--initial", required=True, help="Initial model file")
    parser.add_argument("--survey", required=True, help="Survey JSON file")
    parser.add_argument("--data", help="Observed data CSV")
    parser.add_argument("--model", help="True model; simulates data when --data is absent")
    parser.add_argument("--config", help="FwiConfig JSON file")
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--inner-solver", choices=[s.value for s in InnerSolver])
    parser.add_argument("--maxit", type=int, help="Inner iteration cap")
    parser.add_argument("--tol", type=float, help="Inner tolerance")
    parser.add_argument("--ilu-level", type=int)
    parser.add_argument(
        "--drop-model-term",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Drop the -eps*s_n gradient term (config default: drop)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fwi", description="Frequency-domain full-waveform inversion engine"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    make = commands.add_parser("make-model", help="Build a model file")
    make.add_argument("--kind", required=True, choices=["layered", "lens", "import-raw", "smooth"])
    make.add_argument("--out", required=True)
    make.add_argument("--nx", type=int)
    make.add_argument("--nz", type=int)
    make.add_argument("--h", type=float, help="Grid spacing, m")
    make.add_argument("--n-pml", type=int, default=0)
    make.add_argument("--velocities", type=float, nargs="+", default=[2000.0])
    make.add_argument("--interfaces", type=float, nargs="*", default=[], help="Depths, m")
    make.add_argument("--background", type=float, default=2000.0)
    make.add_argument("--amplitude", type=float, default=200.0, help="Lens peak, m/s")
    make.add_argument("--center", type=float, nargs=2, metavar=("X", "Z"))
    make.add_argument("--radius", type=float, help="Lens radius, m")
    make.add_argument("--input", help="Raw float32 file (import-raw) or model file (smooth)")
    make.add_argument("--z-fastest", action="store_true", help="Raw file is stored z-fastest")
    make.add_argument("--sigma", type=float, default=100.0, help="Smoothing length, m")
    make.add_argument("--value-kind", choices=[k.value for k in ValueKind], default=None)
    make.set_defaults(handler=cmd_make_model)

    simulate = commands.add_parser("simulate", help="Forward-simulate a survey")
    simulate.add_argument("--model", required=True)
    simulate.add_argument("--survey", required=True)
    simulate.add_argument("--out", required=True)
    simulate.add_argument("--frequencies", type=float, nargs="+", help="Override, Hz")
    simulate.set_defaults(handler=cmd_simulate)

    compare = commands.add_parser("compare-solvers", help="Compare inner solvers on one GN step")
    _add_inversion_arguments(compare)
    compare.add_argument("--frequency", type=float, help="Hz; default first configured")
    compare.add_argument("--epsilon", type=float)
    compare.add_argument("--ilu-levels", type=int, nargs="+")
    compare.set_defaults(handler=cmd_compare_solvers)

    invert = commands.add_parser("invert", help="Run the multi-frequency inversion")
    _add_inversion_arguments(invert)
    invert.set_defaults(handler=cmd_invert)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logger.debug(f"Running {args.command} with log level {settings.log_level}")
    try:
        return args.handler(args)
    except FwiError as e:
        logger.error(f"{args.command} failed ({e.category.value}): {e}")
        return e.category.exit_code
    except Exception as e:
        logger.error(f"{args.command} failed unexpectedly: {e}", exc_info=True)
        return ErrorCategory.INTERNAL.exit_code
