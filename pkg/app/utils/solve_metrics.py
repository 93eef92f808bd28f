"""
Counters for linear solves against a factorization.

Counts are per right-hand-side column: a block solve with K columns records K
triangular-solve pairs.
"""

import threading
from typing import Any


class SolveMetrics:
    """Forward/adjoint solve counts and accumulated solve time."""

    def __init__(self):
        self._lock = threading.Lock()
        self.forward_count = 0
        self.adjoint_count = 0
        self.total_solve_time = 0.0

    def record_solve(self, columns: int, adjoint: bool, seconds: float):
        with self._lock:
            if adjoint:
                self.adjoint_count += columns
            else:
                self.forward_count += columns
            self.total_solve_time += seconds

    @property
    def solve_pairs(self) -> int:
        return self.forward_count + self.adjoint_count

    def reset(self):
        with self._lock:
            self.forward_count = 0
            self.adjoint_count = 0
            self.total_solve_time = 0.0

    def get_stats(self) -> dict[str, Any]:
        return {
            "forward_solves": self.forward_count,
            "adjoint_solves": self.adjoint_count,
            "solve_pairs": self.solve_pairs,
            "total_solve_time": round(self.total_solve_time, 3),
        }
