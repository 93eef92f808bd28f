import numpy as np
import pytest

from app.errors import FileFormatError
from app.file_handlers.data_file import COLUMNS, decode_data, encode_data, read_data, write_data
from app.services.forward_problem import DataVector


@pytest.fixture
def data(survey, rng):
    return {
        f: DataVector(rng.standard_normal(survey.n_data) + 1j * rng.standard_normal(survey.n_data))
        for f in (0.25, 0.12)
    }


def test_rows_are_ordered_by_frequency_source_receiver(survey, data):
    lines = encode_data(survey, data).splitlines()
    assert lines[0] == ",".join(COLUMNS)
    assert len(lines) == 1 + 2 * survey.n_data
    first = lines[1].split(",")
    assert first[:5] == ["0.12", "0", "0", "3", "7"]
    fourth = lines[4].split(",")
    assert fourth[:5] == ["0.12", "1", "0", "4", "8"]
    assert lines[7].startswith("0.25,")


def test_values_survive_a_file_exactly(tmp_path, survey, data):
    path = write_data(tmp_path / "obs.csv", survey, data)
    loaded = read_data(path, survey)
    assert sorted(loaded) == [0.12, 0.25]
    for f, values in data.items():
        np.testing.assert_array_equal(loaded[f].values, values.values)


def test_rows_must_match_the_survey(survey, data):
    text = encode_data(survey, data)
    lines = text.splitlines()
    fields = lines[2].split(",")
    fields[3] = "9"
    lines[2] = ",".join(fields)
    with pytest.raises(FileFormatError) as exc:
        decode_data("\n".join(lines), survey)
    assert exc.value.line == 3


def test_missing_rows_are_reported(survey, data):
    lines = encode_data(survey, data).splitlines()
    with pytest.raises(FileFormatError, match="rows at 0.25 Hz"):
        decode_data("\n".join(lines[:-1]), survey)


def test_bad_header_and_values(survey, data):
    with pytest.raises(FileFormatError) as exc:
        decode_data("frequency,real\n", survey)
    assert exc.value.field == "header"

    lines = encode_data(survey, data).splitlines()
    lines[1] = lines[1].rsplit(",", 1)[0] + ",abc"
    with pytest.raises(FileFormatError) as exc:
        decode_data("\n".join(lines), survey)
    assert exc.value.line == 2


def test_wrong_data_length_is_refused(survey):
    with pytest.raises(FileFormatError):
        encode_data(survey, {1.0: DataVector(np.zeros(survey.n_data - 1))})


def test_missing_data_file(tmp_path, survey):
    with pytest.raises(FileFormatError):
        read_data(tmp_path / "absent.csv", survey)
