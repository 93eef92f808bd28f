"""
CSV and JSON outputs of the solver comparison and the inversion.

Deterministic content (iteration histories, misfits) is kept apart from wall
times so reruns can be compared byte for byte.
"""

import csv
import io
from collections.abc import Sequence
from pathlib import Path

from app.schemas import FwiReport, SolverSummary
from app.services.sparse_la import ConvergenceLog
from app.utils.atomic_io import atomic_write_text
from app.utils.logger import setup_logger

logger = setup_logger("report_writer")

SUMMARY_ROWS = ("Iterations", "Time per iteration", "ILU initialization", "Total time")


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _number(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def convergence_csv(logs: Sequence[ConvergenceLog]) -> str:
    rows = [
        [log.solver, record.iteration, _number(record.residual_norm), _number(record.e_cg)]
        for log in logs
        for record in log.records
    ]
    return _csv_text(["solver", "iteration", "residual_norm", "e_cg"], rows)


def timing_csv(logs: Sequence[ConvergenceLog]) -> str:
    rows = [
        [log.solver, record.iteration, f"{record.wall_time:.3f}"]
        for log in logs
        for record in log.records
    ]
    return _csv_text(["solver", "iteration", "wall_time_s"], rows)


def summary_csv(summaries: Sequence[SolverSummary]) -> str:
    """Table with one column per solver and the comparison metrics as rows."""
    rows = [
        ["Iterations", *(s.iterations for s in summaries)],
        ["Time per iteration", *(f"{s.time_per_iteration:.3f}" for s in summaries)],
        ["ILU initialization", *(f"{s.ilu_setup_time:.3f}" for s in summaries)],
        ["Total time", *(f"{s.total_time:.3f}" for s in summaries)],
    ]
    return _csv_text(["metric", *(s.solver for s in summaries)], rows)


def summarize(log: ConvergenceLog) -> SolverSummary:
    return SolverSummary(
        solver=log.solver,
        iterations=log.iterations,
        time_per_iteration=log.time_per_iteration,
        ilu_setup_time=log.setup_time,
        total_time=log.total_time,
        converged=log.converged,
        final_e_cg=log.final_e_cg,
    )


def write_comparison(out_dir: str | Path, logs: Sequence[ConvergenceLog]) -> list[Path]:
    out_dir = Path(out_dir)
    summaries = [summarize(log) for log in logs]
    paths = [
        atomic_write_text(out_dir / "convergence.csv", convergence_csv(logs)),
        atomic_write_text(out_dir / "timing.csv", timing_csv(logs)),
        atomic_write_text(out_dir / "summary.csv", summary_csv(summaries)),
    ]
    logger.info(f"Wrote solver comparison for {len(logs)} solvers to {out_dir}")
    return paths


def misfit_csv(report: FwiReport) -> str:
    rows = [
        [_number(e.frequency_hz), _number(e.resid_norm_ini), _number(e.resid_norm_fin)]
        for e in report.entries
    ]
    return _csv_text(["frequency_hz", "resid_norm_ini", "resid_norm_fin"], rows)


def write_fwi_report(out_dir: str | Path, report: FwiReport) -> list[Path]:
    out_dir = Path(out_dir)
    return [
        atomic_write_text(out_dir / "misfit.csv", misfit_csv(report)),
        atomic_write_text(out_dir / "report.json", report.model_dump_json(indent=2) + "\n"),
    ]
