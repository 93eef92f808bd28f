"""
JSON experiment files: survey geometry and inversion configuration.
"""

from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel, ValidationError

from app.errors import FileFormatError
from app.schemas import FwiConfig, SurveySpec
from app.services.forward_problem import Survey
from app.services.grid_pml import Grid2D
from app.utils.atomic_io import atomic_write_text
from app.utils.logger import setup_logger

logger = setup_logger("experiment_files")

SchemaType = TypeVar("SchemaType", bound=BaseModel)


def _load_json(path: str | Path, schema: type[SchemaType]) -> SchemaType:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise FileFormatError(f"cannot read {path}: {e}") from e
    try:
        return schema.model_validate_json(text)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or None
        logger.error(f"Invalid {schema.__name__} in {path}: {e.error_count()} error(s)")
        raise FileFormatError(f"{path}: {first['msg']}", field=field) from e


def read_survey_spec(path: str | Path) -> SurveySpec:
    return _load_json(path, SurveySpec)


def read_survey(path: str | Path, grid: Grid2D) -> tuple[Survey, SurveySpec]:
    spec = read_survey_spec(path)
    return Survey.from_spec(grid, spec), spec


def write_survey(path: str | Path, spec: SurveySpec) -> Path:
    return atomic_write_text(path, spec.model_dump_json(indent=2) + "\n")


def read_fwi_config(path: str | Path) -> FwiConfig:
    return _load_json(path, FwiConfig)


def write_fwi_config(path: str | Path, config: FwiConfig) -> Path:
    return atomic_write_text(path, config.model_dump_json(indent=2) + "\n")
