"""Scenario simulation, traces, batches, artifacts and the command line."""
from .artifacts import asymmetry_confined, emit_artifacts, rope_asymmetry, turn_window
from .batch import BatchReport, RunRecord, acceptance, run_batch, stat, summarize
from .runner import HeadingFilter, run_scenario
from .scenario import (
    HEADER,
    Kind,
    ScenarioConfig,
    Walker,
    builtin,
    builtin_names,
    load_scenario,
    parse_text,
    resolve,
)
from .trace import COLUMNS, RunMetrics, Trace, compute_metrics, parse_trace, read_trace

__all__ = [
    "COLUMNS", "HEADER", "BatchReport", "HeadingFilter", "Kind", "RunMetrics", "RunRecord",
    "ScenarioConfig", "Trace", "Walker", "acceptance", "asymmetry_confined", "builtin",
    "builtin_names", "compute_metrics", "emit_artifacts", "load_scenario", "parse_text",
    "parse_trace", "read_trace", "resolve", "rope_asymmetry", "run_batch", "run_scenario",
    "stat", "summarize", "turn_window",
]
