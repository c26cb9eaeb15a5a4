"""Per-epoch neighbour discovery abstracted to its service-level agreement."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .config import SimConfig


@dataclass
class NeighborEntry:
    slot: int
    last_heard: int


@dataclass
class NodeState:
    device_id: str
    position: np.ndarray = field(default_factory=lambda: np.zeros(2))
    neighbors: dict[str, NeighborEntry] = field(default_factory=dict)
    asleep_until: float | None = None

    def awake(self, t: float) -> bool:
        return self.asleep_until is None or t >= self.asleep_until

    def slots(self) -> dict[str, int]:
        return {n: e.slot for n, e in self.neighbors.items()}

    @property
    def discovered_neighbors(self) -> set[tuple[str, int]]:
        return {(n, e.slot) for n, e in self.neighbors.items()}

    def free_slot(self, max_neighbors: int) -> int | None:
        used = {e.slot for e in self.neighbors.values()}
        for s in range(max_neighbors):
            if s not in used:
                return s
        return None


@dataclass
class DiscoveryStats:
    epochs: int = 0
    candidate_pairs: int = 0
    discoveries: int = 0
    saturation_events: int = 0
    excess_neighbors: int = 0


def discovery_step(
    nodes: Mapping[str, NodeState],
    epoch: int,
    t: float,
    config: SimConfig,
    rng: np.random.Generator,
    stats: DiscoveryStats | None = None,
) -> dict[str, set[str]]:
    """Advance every neighbour table by one discovery epoch at time ``t``.

    Each awake pair within ``detection_range`` is mutually heard with probability
    ``discovery_probability``. A heard neighbour takes the lowest free slot of the
    hearer's ranging window; once the window's ``max_neighbors`` slots are taken the
    remaining neighbours go undiscovered this epoch. Returns, per node, the set of
    neighbours heard in this epoch.
    """
    if stats is None:
        stats = DiscoveryStats()
    stats.epochs += 1
    heard: dict[str, set[str]] = {d: set() for d in nodes}

    for node in nodes.values():
        stale = [n for n, e in node.neighbors.items() if epoch - e.last_heard >= config.neighbor_expiry]
        for n in stale:
            del node.neighbors[n]

    awake = [nodes[d] for d in nodes if nodes[d].awake(t)]
    if len(awake) < 2:
        return heard
    pos = np.array([n.position for n in awake], dtype=float)
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    iu, ju = np.triu_indices(len(awake), k=1)
    in_range = dist[iu, ju] <= config.detection_range
    iu, ju = iu[in_range], ju[in_range]
    stats.candidate_pairs += len(iu)
    if len(iu) == 0:
        return heard

    degree = np.bincount(np.concatenate([iu, ju]), minlength=len(awake))
    stats.saturation_events += int(np.count_nonzero(degree > config.max_neighbors))

    success = rng.random(len(iu)) < config.discovery_probability
    iu, ju = iu[success], ju[success]
    # insertion order decides who gets the last free slots under saturation
    order = rng.permutation(len(iu))
    for k in order:
        a, b = awake[iu[k]], awake[ju[k]]
        for hearer, heardee in ((a, b), (b, a)):
            entry = hearer.neighbors.get(heardee.device_id)
            if entry is not None:
                entry.last_heard = epoch
            else:
                slot = hearer.free_slot(config.max_neighbors)
                if slot is None:
                    stats.excess_neighbors += 1
                    continue
                hearer.neighbors[heardee.device_id] = NeighborEntry(slot, epoch)
            heard[hearer.device_id].add(heardee.device_id)
            stats.discoveries += 1
    return heard
