"""
Common utilities package for the FWI engine: logging, solve metrics and
atomic file writes.
"""

from app.utils.atomic_io import atomic_write_bytes, atomic_write_text
from app.utils.logger import log_duration, setup_logger
from app.utils.solve_metrics import SolveMetrics

__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "log_duration",
    "setup_logger",
    "SolveMetrics",
]
