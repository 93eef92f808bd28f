from app.file_handlers.data_file import read_data, write_data
from app.file_handlers.experiment_files import (
    read_fwi_config,
    read_survey,
    read_survey_spec,
    write_fwi_config,
    write_survey,
)
from app.file_handlers.heatmap import write_heatmap
from app.file_handlers.model_file import read_model, write_model
from app.file_handlers.report_writer import write_comparison, write_fwi_report

__all__ = [
    "read_data",
    "write_data",
    "read_fwi_config",
    "read_survey",
    "read_survey_spec",
    "write_fwi_config",
    "write_survey",
    "write_heatmap",
    "read_model",
    "write_model",
    "write_comparison",
    "write_fwi_report",
]
