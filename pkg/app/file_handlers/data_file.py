"""
Data files: one CSV row per datum, ordered by frequency, source, receiver.
"""

import csv
import io
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from app.errors import FileFormatError
from app.services.forward_problem import DataVector, Survey
from app.utils.atomic_io import atomic_write_text
from app.utils.logger import setup_logger

logger = setup_logger("data_file")

COLUMNS = ["frequency_hz", "source_index", "receiver_index", "node_x", "node_z", "real", "imag"]


def encode_data(survey: Survey, data: Mapping[float, DataVector]) -> str:
    grid = survey.grid
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(COLUMNS)
    receiver_index = np.concatenate([np.arange(c) for c in survey.receiver_counts])
    for frequency_hz in sorted(data):
        values = data[frequency_hz].values
        if values.size != survey.n_data:
            raise FileFormatError(
                f"{values.size} data values at {frequency_hz:g} Hz, survey has {survey.n_data}"
            )
        for entry, value in enumerate(values):
            i, j = grid.coords(int(survey.data_nodes[entry]))
            writer.writerow(
                [
                    repr(float(frequency_hz)),
                    int(survey.data_sources[entry]),
                    int(receiver_index[entry]),
                    i,
                    j,
                    repr(float(value.real)),
                    repr(float(value.imag)),
                ]
            )
    return buffer.getvalue()


def write_data(path: str | Path, survey: Survey, data: Mapping[float, DataVector]) -> Path:
    target = atomic_write_text(path, encode_data(survey, data))
    logger.info(f"Wrote {len(data)} frequencies x {survey.n_data} data to {target}")
    return target


def decode_data(text: str, survey: Survey) -> dict[float, DataVector]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != COLUMNS:
        raise FileFormatError(f"expected columns {','.join(COLUMNS)}", field="header", line=1)

    grid = survey.grid
    receiver_index = np.concatenate([np.arange(c) for c in survey.receiver_counts])
    rows: dict[float, list[complex]] = {}
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(COLUMNS):
            raise FileFormatError(f"expected {len(COLUMNS)} columns, found {len(row)}", line=line_no)
        record = dict(zip(COLUMNS, row, strict=True))
        try:
            frequency_hz = float(record["frequency_hz"])
            source, receiver = int(record["source_index"]), int(record["receiver_index"])
            i, j = int(record["node_x"]), int(record["node_z"])
            value = complex(float(record["real"]), float(record["imag"]))
        except ValueError as e:
            raise FileFormatError(f"unparsable value: {e}", line=line_no) from e

        entries = rows.setdefault(frequency_hz, [])
        entry = len(entries)
        if entry >= survey.n_data:
            raise FileFormatError(
                f"more than {survey.n_data} rows at {frequency_hz:g} Hz", line=line_no
            )
        expected_node = int(survey.data_nodes[entry])
        if (
            source != int(survey.data_sources[entry])
            or receiver != int(receiver_index[entry])
            or (i, j) != grid.coords(expected_node)
        ):
            raise FileFormatError(
                f"row does not match survey entry {entry} (source {source}, node ({i}, {j}))",
                field="source_index",
                line=line_no,
            )
        entries.append(value)

    for frequency_hz, entries in rows.items():
        if len(entries) != survey.n_data:
            raise FileFormatError(
                f"{len(entries)} rows at {frequency_hz:g} Hz, survey has {survey.n_data} data"
            )
    return {f: DataVector(np.array(v, dtype=np.complex128)) for f, v in rows.items()}


def read_data(path: str | Path, survey: Survey) -> dict[float, DataVector]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise FileFormatError(f"cannot read data file {path}: {e}") from e
    return decode_data(text, survey)
