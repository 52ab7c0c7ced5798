"""Capability-aware ad hoc teamwork: typed beliefs, inference and search."""

from capteam.capability import (
    Belief,
    BeliefBank,
    CapabilitySet,
    Mode,
    PlayerRoster,
    feasible_assignments,
    intervene,
    is_type_structure,
    reduce,
)

__all__ = [
    "Belief",
    "BeliefBank",
    "CapabilitySet",
    "Mode",
    "PlayerRoster",
    "feasible_assignments",
    "intervene",
    "is_type_structure",
    "reduce",
]

__version__ = "0.1.0"
