"""
Per-iteration convergence records shared by CG and GMRes.
"""

from dataclasses import dataclass, field
from typing import Any


@dataclass
class ConvergenceRecord:
    iteration: int
    residual_norm: float
    e_cg: float | None = None
    wall_time: float = 0.0
    preconditioned_residual_norm: float | None = None


@dataclass
class ConvergenceLog:
    """
    Iteration 0 is the initial guess; indices increase strictly by one.
    `wall_time` is cumulative solver time excluding observer callbacks.
    """

    solver: str
    records: list[ConvergenceRecord] = field(default_factory=list)
    converged: bool = False
    stagnated: bool = False
    setup_time: float = 0.0

    def append(self, record: ConvergenceRecord):
        if self.records and record.iteration != self.records[-1].iteration + 1:
            raise ValueError(
                f"iteration {record.iteration} does not follow {self.records[-1].iteration}"
            )
        if not self.records and record.iteration != 0:
            raise ValueError("convergence logs start at iteration 0")
        self.records.append(record)

    @property
    def iterations(self) -> int:
        return self.records[-1].iteration if self.records else 0

    @property
    def final_residual(self) -> float | None:
        return self.records[-1].residual_norm if self.records else None

    @property
    def final_e_cg(self) -> float | None:
        for record in reversed(self.records):
            if record.e_cg is not None:
                return record.e_cg
        return None

    @property
    def solve_time(self) -> float:
        return self.records[-1].wall_time if self.records else 0.0

    @property
    def time_per_iteration(self) -> float:
        return self.solve_time / self.iterations if self.iterations else 0.0

    @property
    def total_time(self) -> float:
        return self.setup_time + self.solve_time

    def e_cg_curve(self) -> list[tuple[int, float]]:
        return [(r.iteration, r.e_cg) for r in self.records if r.e_cg is not None]

    def summary(self) -> dict[str, Any]:
        return {
            "solver": self.solver,
            "iterations": self.iterations,
            "converged": self.converged,
            "stagnated": self.stagnated,
            "final_residual": self.final_residual,
            "final_e_cg": self.final_e_cg,
            "setup_time": round(self.setup_time, 3),
            "solve_time": round(self.solve_time, 3),
        }
