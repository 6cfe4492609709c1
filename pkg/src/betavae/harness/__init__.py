"""Experiment configs, sweeps, aggregation and the command-line interface."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .records import (
    MODES,
    EmptyGroupError,
    RunRecord,
    aggregate,
    export_records,
    format_summary,
    import_records,
    load_records,
    summary_table,
)
from .runner import check_record, run, run_one
