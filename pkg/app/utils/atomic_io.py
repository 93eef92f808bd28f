"""
Atomic file writes: write to a temporary sibling, then rename over the target.
"""

import os
import tempfile
from pathlib import Path

from app.errors import ErrorCategory, FwiError
from app.utils.logger import setup_logger

logger = setup_logger("atomic_io")


class OutputWriteError(FwiError):
    category = ErrorCategory.IO


def atomic_write_bytes(path: str | Path, payload: bytes) -> Path:
    """Write `payload` to `path` so readers never observe a partial file."""
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    except OSError as e:
        raise OutputWriteError(f"cannot create {target}: {e}") from e
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, target)
    except OSError as e:
        try:
            os.unlink(tmp_name)
        except FileNotFoundError:
            pass
        logger.error(f"Failed to write {target}: {e}")
        raise OutputWriteError(f"cannot write {target}: {e}") from e
    logger.debug(f"Wrote {len(payload)} bytes to {target}")
    return target


def atomic_write_text(path: str | Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))
