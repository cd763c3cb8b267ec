"""Experiment harness: configs, the deterministic runner, gradient
checking, fairness metrics, and the command-line interface."""

from .config import (
    ExperimentConfig,
    apply_overrides,
    build_problem,
    build_schedule,
    config_hash,
    load_config,
    mode_for_algorithm,
)
from .fairness import FairnessReport, fairness_metrics, partial_auc
from .gradcheck import GradCheckReport, grad_check
from .runner import (
    TRACE_HEADER,
    ExperimentResult,
    RunAborted,
    read_trace,
    run_experiment,
    trace_payload,
)

__all__ = [
    "ExperimentConfig",
    "apply_overrides",
    "build_problem",
    "build_schedule",
    "config_hash",
    "load_config",
    "mode_for_algorithm",
    "FairnessReport",
    "fairness_metrics",
    "partial_auc",
    "GradCheckReport",
    "grad_check",
    "TRACE_HEADER",
    "ExperimentResult",
    "RunAborted",
    "read_trace",
    "run_experiment",
    "trace_payload",
]
