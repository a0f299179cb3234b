"""Deterministic discrete-event simulator with pluggable control planes."""

from .engine import ConfigError, EventLog, IncompleteLog, LinkLatencies, Network, Simulator
from .lisp import LispPlane, MigrationAbort, Unresolvable
from .runner import SimMetrics, measure_downtime, migration_conservation, rtt_probe, run
from .scenario import (
    ControlPlaneConfig,
    DecisionConfig,
    MobilityConfig,
    ScenarioConfig,
    load_config,
    preset_lisp,
    preset_sdn,
    preset_validate,
)
from .sdn import RuleConflict, SdnPlane

__all__ = [
    "ConfigError",
    "ControlPlaneConfig",
    "DecisionConfig",
    "EventLog",
    "IncompleteLog",
    "LinkLatencies",
    "LispPlane",
    "MigrationAbort",
    "MobilityConfig",
    "Network",
    "RuleConflict",
    "ScenarioConfig",
    "SdnPlane",
    "SimMetrics",
    "Simulator",
    "Unresolvable",
    "load_config",
    "measure_downtime",
    "migration_conservation",
    "preset_lisp",
    "preset_sdn",
    "preset_validate",
    "rtt_probe",
    "run",
]
