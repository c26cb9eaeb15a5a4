"""Simulator of BLE-coordinated UWB proximity measurement."""

from .config import SPEED_OF_LIGHT, ConfigError, Inhibitor, SimConfig
from .discovery import DiscoveryStats, NeighborEntry, NodeState, discovery_step
from .engine import (
    SimulationResult,
    load_ground_truth,
    run_simulation,
    write_ground_truth,
    write_simulation,
)
from .inhibitor import inhibitor_protocol
from .mobility import (
    MobilityError,
    MobilityScript,
    Segment,
    Trajectories,
    build_trajectories,
    load_mobility,
    write_mobility,
)
from .ranging import GroundTruth, TwrExchange, ranging_round, sstwr_exchange, sstwr_range

__all__ = [
    "SPEED_OF_LIGHT",
    "ConfigError",
    "DiscoveryStats",
    "GroundTruth",
    "Inhibitor",
    "MobilityError",
    "MobilityScript",
    "NeighborEntry",
    "NodeState",
    "Segment",
    "SimConfig",
    "SimulationResult",
    "Trajectories",
    "TwrExchange",
    "build_trajectories",
    "discovery_step",
    "inhibitor_protocol",
    "load_ground_truth",
    "load_mobility",
    "ranging_round",
    "run_simulation",
    "sstwr_exchange",
    "sstwr_range",
    "write_ground_truth",
    "write_mobility",
    "write_simulation",
]
