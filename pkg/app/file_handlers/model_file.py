"""
Model files: a short text header followed by little-endian float64 values.

    FWIMODEL 1
    nx <int>
    nz <int>
    h <float>
    n_pml <int>
    kind velocity_mps|slowness_sq
    data_bytes <int>
    END
    <nx*nz float64 values, x fastest>

Values are converted to squared slowness on load according to `kind`.
"""

from pathlib import Path

import numpy as np
from pydantic import ValidationError

from app.errors import FileFormatError, FwiError
from app.schemas import ModelHeader, ValueKind
from app.services.grid_pml import build_grid
from app.services.helmholtz_assembly import SlownessModel
from app.utils.atomic_io import atomic_write_bytes
from app.utils.logger import setup_logger

logger = setup_logger("model_file")

MAGIC = "FWIMODEL 1"
HEADER_FIELDS = ("nx", "nz", "h", "n_pml", "kind", "data_bytes")
_FLOAT64_LE = np.dtype("<f8")


def encode_model(model: SlownessModel, kind: ValueKind = ValueKind.SLOWNESS_SQ) -> bytes:
    grid = model.grid
    values = model.values if kind is ValueKind.SLOWNESS_SQ else model.velocity
    payload = np.ascontiguousarray(values, dtype=_FLOAT64_LE).tobytes()
    header = [
        MAGIC,
        f"nx {grid.nx}",
        f"nz {grid.nz}",
        f"h {grid.h!r}",
        f"n_pml {grid.n_pml}",
        f"kind {kind.value}",
        f"data_bytes {len(payload)}",
        "END",
    ]
    return ("\n".join(header) + "\n").encode("ascii") + payload


def _parse_header(raw: bytes) -> tuple[dict[str, str], int]:
    """Header fields and the byte offset where the payload starts."""
    fields: dict[str, str] = {}
    offset = 0
    line_no = 0
    while True:
        end = raw.find(b"\n", offset)
        if end < 0:
            raise FileFormatError("header is not terminated by END", line=line_no + 1)
        line_no += 1
        try:
            line = raw[offset:end].decode("ascii").strip()
        except UnicodeDecodeError as e:
            raise FileFormatError("header is not ASCII text", line=line_no) from e
        offset = end + 1
        if line_no == 1:
            if line != MAGIC:
                raise FileFormatError(f"expected '{MAGIC}', found '{line[:40]}'", line=1)
            continue
        if line == "END":
            return fields, offset
        key, _, value = line.partition(" ")
        if key not in HEADER_FIELDS:
            raise FileFormatError(f"unknown header field '{key}'", field=key, line=line_no)
        if key in fields:
            raise FileFormatError("duplicate header field", field=key, line=line_no)
        if not value.strip():
            raise FileFormatError("missing value", field=key, line=line_no)
        fields[key] = value.strip()


def decode_model(raw: bytes) -> tuple[SlownessModel, ModelHeader]:
    fields, offset = _parse_header(raw)
    for key in HEADER_FIELDS:
        if key not in fields:
            raise FileFormatError("missing header field", field=key)
    try:
        header = ModelHeader(
            nx=fields["nx"], nz=fields["nz"], h=fields["h"], n_pml=fields["n_pml"], kind=fields["kind"]
        )
    except ValidationError as e:
        first = e.errors()[0]
        field = str(first["loc"][0]) if first["loc"] else None
        raise FileFormatError(f"invalid header: {first['msg']}", field=field) from e
    try:
        declared = int(fields["data_bytes"])
    except ValueError as e:
        raise FileFormatError("not an integer", field="data_bytes") from e

    payload = raw[offset:]
    expected = header.n_nodes * _FLOAT64_LE.itemsize
    if declared != expected:
        raise FileFormatError(
            f"declares {declared} bytes but {header.nx}x{header.nz} needs {expected}",
            field="data_bytes",
        )
    if len(payload) != declared:
        raise FileFormatError(
            f"payload has {len(payload)} bytes, header declares {declared}", field="data_bytes"
        )
    values = np.frombuffer(payload, dtype=_FLOAT64_LE).astype(np.float64)
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise FileFormatError("model values must be finite and positive", field="data")

    try:
        grid = build_grid(header.nx, header.nz, header.h, header.n_pml)
    except FwiError as e:
        raise FileFormatError(str(e), field="n_pml") from e
    if header.kind is ValueKind.VELOCITY:
        model = SlownessModel.from_velocity(grid, values)
    else:
        model = SlownessModel(grid, values)
    return model, header


def write_model(
    path: str | Path, model: SlownessModel, kind: ValueKind = ValueKind.SLOWNESS_SQ
) -> Path:
    target = atomic_write_bytes(path, encode_model(model, kind))
    logger.debug(f"Wrote {model.grid.nx}x{model.grid.nz} model ({kind.value}) to {target}")
    return target


def read_model(path: str | Path) -> tuple[SlownessModel, ModelHeader]:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise FileFormatError(f"cannot read model file {path}: {e}") from e
    try:
        return decode_model(raw)
    except FileFormatError as e:
        logger.error(f"Cannot parse model file {path}: {e}")
        raise
