"""Two-relay cooperative random-access network: analysis and simulation."""

from .model import (
    CollisionParams,
    MprParams,
    NodeId,
    Packet,
    ScenarioConfig,
    Strategy,
    ValidationResult,
    default_collision_params,
    default_mpr_topology,
    validate,
)
from .sim import MetricsReport, run, stability_probe, sweep

__all__ = [
    "CollisionParams",
    "MprParams",
    "NodeId",
    "Packet",
    "ScenarioConfig",
    "Strategy",
    "ValidationResult",
    "MetricsReport",
    "default_collision_params",
    "default_mpr_topology",
    "run",
    "stability_probe",
    "sweep",
    "validate",
]
