"""Experiment orchestration: configs, fits, experiments, reports, CLI."""

from .config import Config, parse_config, serialize_config
from .experiments import (
    CRITERION_TO_EXPERIMENT,
    clear_cache,
    run_experiment,
    verify_criterion,
)
from .fits import FitResult, RateEstimate, fit_oscillation, rate_estimate
from .report import Criterion, Report, Row

__all__ = [
    "Config",
    "parse_config",
    "serialize_config",
    "CRITERION_TO_EXPERIMENT",
    "clear_cache",
    "run_experiment",
    "verify_criterion",
    "FitResult",
    "RateEstimate",
    "fit_oscillation",
    "rate_estimate",
    "Criterion",
    "Report",
    "Row",
]
