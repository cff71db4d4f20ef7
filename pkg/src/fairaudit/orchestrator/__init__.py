"""Audit pipeline orchestration: stages, options, reports and the derived runs."""

from fairaudit.orchestrator.options import DEFAULT_EPSILON_GRID, AuditOptions
from fairaudit.orchestrator.report import (
    EXIT_FAILURE,
    EXIT_OK,
    EXIT_THRESHOLD_BREACH,
    REPORT_VERSION,
    AuditReport,
)
from fairaudit.orchestrator.manager import AuditContext, AuditManager
from fairaudit.orchestrator.runs import (
    DecompositionMode,
    DecompositionRun,
    MitigationRun,
    ProxyRun,
    Strategy,
    constrained_metric,
    constraint_kind,
    run_decomposition,
    run_mitigation,
    run_proxy,
)

__all__ = [
    # Options
    "DEFAULT_EPSILON_GRID",
    "AuditOptions",
    # Report
    "EXIT_FAILURE",
    "EXIT_OK",
    "EXIT_THRESHOLD_BREACH",
    "REPORT_VERSION",
    "AuditReport",
    # Pipeline
    "AuditContext",
    "AuditManager",
    # Runs
    "DecompositionMode",
    "DecompositionRun",
    "MitigationRun",
    "ProxyRun",
    "Strategy",
    "constrained_metric",
    "constraint_kind",
    "run_decomposition",
    "run_mitigation",
    "run_proxy",
]
