"""Scenario files, Monte Carlo experiments and report output."""

from .experiments import KINDS, SCHEMES, ExperimentSpec, run_experiment, trial_seed
from .report import COLUMNS, RateReport, emit_report, read_csv_records
from .scenario import Scenario, ScenarioError, dump_scenario, load_scenario, sample_users

__all__ = [
    "COLUMNS", "KINDS", "SCHEMES", "ExperimentSpec", "RateReport", "Scenario", "ScenarioError", "dump_scenario",
    "emit_report", "load_scenario", "read_csv_records", "run_experiment", "sample_users", "trial_seed",
]
