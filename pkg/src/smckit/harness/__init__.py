"""Experiment harness: configuration, orchestration, serialization, CLI."""

from .config import (build_kernel_spec, build_model, build_schedule,
                     config_hash, resolve, validate)
from .experiments import fig1_protocol, fig2_protocol, plan_rows, run_experiment
from .writers import RESULT_COLUMNS, ResultRow, write_results

__all__ = [
    "validate", "resolve", "config_hash", "build_model", "build_schedule",
    "build_kernel_spec", "run_experiment", "fig1_protocol", "fig2_protocol",
    "plan_rows", "ResultRow", "RESULT_COLUMNS", "write_results",
]
