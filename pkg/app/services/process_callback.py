"""
Progress callback utilities for multi-frequency inversion runs.

Provides callback system for reporting progress during long-running operations
with multiple callback registration and error handling for callback failures.
"""

from collections.abc import Callable
from typing import Any

from app.utils.logger import setup_logger

logger = setup_logger("process_callback")

Callback = Callable[[str, str, dict[str, Any] | None], None]


class ProgressCallback:
    """
    Progress callback interface for inversion runs.

    Manages multiple callback functions for progress reporting. Callback failures
    are logged and never interrupt the inversion.
    """

    def __init__(self, callbacks: list[Callback] | None = None):
        self.callbacks = callbacks or []

    def add(self, callback: Callback):
        self.callbacks.append(callback)

    def report(self, message: str, step: str, data: dict[str, Any] | None = None):
        """
        Report progress to all registered callbacks.

        If any callback fails, the error is logged but doesn't prevent other
        callbacks from being executed.
        """
        for callback in self.callbacks:
            try:
                callback(message, step, data)
            except Exception as e:
                logger.error(f"Error in progress callback: {e}", exc_info=False)


def logging_callback(message: str, step: str, data: dict[str, Any] | None = None):
    logger.info(f"[{step}] {message}")
