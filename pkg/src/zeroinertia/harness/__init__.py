"""Experiment configuration, epsilon sweeps, persistence and reports."""
from .config import ExperimentSpec, SpecError, load_spec, parse_spec_text
from .experiment import Check, RunSummary, run_experiment, sweep_epsilon
from .report import emit_report, load_summary, read_series_csv, write_series_csv

__all__ = [
    "Check",
    "ExperimentSpec",
    "RunSummary",
    "SpecError",
    "emit_report",
    "load_spec",
    "load_summary",
    "parse_spec_text",
    "read_series_csv",
    "run_experiment",
    "sweep_epsilon",
    "write_series_csv",
]
