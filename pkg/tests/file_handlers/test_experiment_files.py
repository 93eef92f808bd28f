import json

import pytest

from app.errors import FileFormatError, SurveyError
from app.file_handlers.experiment_files import (
    read_fwi_config,
    read_survey,
    read_survey_spec,
    write_fwi_config,
    write_survey,
)
from app.schemas import FwiConfig, InnerSolver, SourceSpec, SurveySpec, WeightMode


@pytest.fixture
def spec():
    return SurveySpec(
        frequencies_hz=[0.1, 0.12],
        sources=[
            SourceSpec(position=(4, 4), receivers=[(3, 7), (5, 7)]),
            SourceSpec(position=(7, 4), receivers=[(6, 8)], amplitude=0.5),
        ],
        weight_mode=WeightMode.OFFSET,
    )


def test_survey_file_builds_the_survey(tmp_path, grid, spec):
    path = write_survey(tmp_path / "survey.json", spec)
    survey, loaded = read_survey(path, grid)
    assert loaded == spec
    assert survey.n_sources == 2 and survey.n_data == 3
    assert survey.sources[1] == grid.index(7, 4)
    assert survey.amplitudes[1] == 0.5


def test_survey_validation_error_names_the_field(tmp_path):
    path = tmp_path / "survey.json"
    path.write_text(json.dumps({"frequencies_hz": [1.0], "sources": [{"position": [1, 1]}]}))
    with pytest.raises(FileFormatError) as exc:
        read_survey_spec(path)
    assert exc.value.field == "sources.0.receivers"


def test_survey_outside_the_core_is_rejected(tmp_path, grid, spec):
    bad = spec.model_copy(
        update={"sources": [SourceSpec(position=(0, 4), receivers=[(5, 5)])]}
    )
    path = write_survey(tmp_path / "survey.json", bad)
    with pytest.raises(SurveyError):
        read_survey(path, grid)


def test_malformed_json(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{not json")
    with pytest.raises(FileFormatError):
        read_fwi_config(path)


def test_config_file_round_trip_keeps_settings(tmp_path):
    config = FwiConfig(
        frequencies_hz=[4.0, 6.0],
        epsilon_values=[1.0, 2.0],
        inner_solver=InnerSolver.RSGN_CG,
        slowness_min=1e-7,
    )
    loaded = read_fwi_config(write_fwi_config(tmp_path / "config.json", config))
    assert loaded == config
    assert loaded.epsilon_schedule() == [1.0, 2.0]


def test_config_errors_are_file_format_errors(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"frequencies_hz": [6.0, 4.0]}))
    with pytest.raises(FileFormatError) as exc:
        read_fwi_config(path)
    assert exc.value.field == "frequencies_hz"


def test_missing_config_file(tmp_path):
    with pytest.raises(FileFormatError, match="cannot read"):
        read_fwi_config(tmp_path / "absent.json")
