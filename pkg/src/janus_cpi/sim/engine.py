"""Discrete-event loop driving discovery, ranging windows and the inhibitor."""

from __future__ import annotations

import csv
import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from ..model import RawMeasurement, Roster, device_key, write_measurements
from .config import SimConfig
from .discovery import DiscoveryStats, NodeState, discovery_step
from .inhibitor import inhibitor_protocol
from .mobility import MobilityScript, Trajectories, build_trajectories
from .ranging import GroundTruth, ranging_round

GROUND_TRUTH_HEADER = ("device_a", "device_b", "timestamp", "true_distance_m")

# same-time ordering: wake-ups scan before the epoch's discovery, windows come last
_WAKE, _EPOCH, _WINDOW = 0, 1, 2


@dataclass
class SimulationResult:
    measurements: list[RawMeasurement]
    ground_truth: list[GroundTruth]
    summary: dict = field(default_factory=dict)
    trajectories: Trajectories | None = None


def _inhibitor_heard(config: SimConfig, position: np.ndarray, t: float, rng: np.random.Generator) -> bool:
    hit = False
    for inh in config.inhibitors:
        if not inh.active(t):
            continue
        if inh.position is not None:
            reach = inh.range if inh.range is not None else config.detection_range
            if math.hypot(position[0] - inh.position[0], position[1] - inh.position[1]) > reach:
                continue
        hit = True
        break
    if hit and config.inhibitor_detection_probability < 1.0:
        hit = bool(rng.random() < config.inhibitor_detection_probability)
    return hit


def _next_aligned(t: float, anchor: float, period: float) -> float:
    """Smallest ``anchor + k * period`` that is >= t."""
    k = math.ceil((t - anchor) / period)
    return anchor + max(k, 0) * period


def run_simulation(
    config: SimConfig,
    roster: Roster | Iterable[str],
    mobility: MobilityScript,
) -> SimulationResult:
    """Simulate the dual-radio protocol over ``[config.start, config.end)``.

    Yields the initiator-side measurement log (both directions of a pair range
    independently) and the true distance at every ranging exchange.
    """
    devices = roster.device_ids if isinstance(roster, Roster) else sorted(roster, key=device_key)
    seeds = np.random.SeedSequence(config.seed).spawn(4)
    move_rng, disc_rng, range_rng, inh_rng = (np.random.default_rng(s) for s in seeds)

    traj = build_trajectories(mobility, devices, config.start, config.end, move_rng)
    nodes = {d: NodeState(d) for d in devices}
    phases = {d: int(p) for d, p in zip(devices, disc_rng.integers(0, int(config.ranging_period), len(devices)))}

    stats = DiscoveryStats()
    measurements: list[RawMeasurement] = []
    truth: list[GroundTruth] = []
    sleeping_since: dict[str, float] = {}
    sleep_log: dict[str, list[list[float]]] = {d: [] for d in devices}

    seq = 0
    heap: list[tuple[float, int, int, str]] = []

    def push(t: float, kind: int, device: str = "") -> None:
        nonlocal seq
        if t < config.end:
            heapq.heappush(heap, (t, kind, seq, device))
            seq += 1

    def scan_inhibitor(node: NodeState, t: float, position: np.ndarray) -> None:
        was_asleep_chain = node.device_id in sleeping_since
        inhibitor_protocol(node, _inhibitor_heard(config, position, t, inh_rng), t, config)
        if node.asleep_until is not None:
            if not was_asleep_chain:
                sleeping_since[node.device_id] = t
            push(node.asleep_until, _WAKE, node.device_id)
        elif was_asleep_chain:
            sleep_log[node.device_id].append([sleeping_since.pop(node.device_id), t])

    push(config.start, _EPOCH)
    for d in devices:
        push(config.start + phases[d], _WINDOW, d)

    while heap:
        t, kind, _, d = heapq.heappop(heap)
        if kind == _EPOCH:
            pos = traj.positions_at(t)
            for node in nodes.values():
                node.position = pos[node.device_id]
            for node in nodes.values():
                if node.awake(t):
                    scan_inhibitor(node, t, node.position)
            epoch = int((t - config.start) // config.epoch_length)
            discovery_step(nodes, epoch, t, config, disc_rng, stats)
            nxt = t + config.epoch_length
            if not any(n.awake(t) for n in nodes.values()):
                wake = min(n.asleep_until for n in nodes.values())
                nxt = max(nxt, _next_aligned(wake, config.start, config.epoch_length))
            push(nxt, _EPOCH)
        elif kind == _WAKE:
            node = nodes[d]
            if node.asleep_until is not None and node.asleep_until == t:
                scan_inhibitor(node, t, traj.position(d, t))
        else:
            node = nodes[d]
            if node.awake(t):
                measurements.extend(
                    ranging_round(node, nodes, traj.positions_at, config, range_rng, t, truth)
                )
                push(t + config.ranging_period, _WINDOW, d)
            else:
                anchor = config.start + phases[d]
                push(_next_aligned(max(node.asleep_until, t + 1e-9), anchor, config.ranging_period),
                     _WINDOW, d)

    for d, since in sleeping_since.items():
        until = nodes[d].asleep_until
        sleep_log[d].append([since, min(until if until is not None else config.end, config.end)])

    summary = {
        "config": config.to_mapping(),
        "devices": len(devices),
        "measurements": len(measurements),
        "ranging_exchanges": len(truth),
        "discarded_beyond_max_range": len(truth) - len(measurements),
        "discovery": {
            "epochs": stats.epochs,
            "candidate_pairs": stats.candidate_pairs,
            "discoveries": stats.discoveries,
            "saturation_events": stats.saturation_events,
            "excess_neighbors": stats.excess_neighbors,
        },
        "sleep_intervals": {d: iv for d, iv in sleep_log.items() if iv},
    }
    return SimulationResult(measurements, truth, summary, traj)


def write_ground_truth(path: str | Path, rows: Iterable[GroundTruth]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GROUND_TRUTH_HEADER)
        w.writerows((g.device_a, g.device_b, g.timestamp, repr(float(g.true_distance))) for g in rows)


def load_ground_truth(path: str | Path) -> list[GroundTruth]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if tuple(header) != GROUND_TRUTH_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [GroundTruth(a, b, int(ts), float(d)) for a, b, ts, d in reader]


def write_simulation(result: SimulationResult, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "measurements": out / "measurements.csv",
        "ground_truth": out / "ground_truth.csv",
        "summary": out / "simulation_summary.json",
    }
    write_measurements(paths["measurements"], result.measurements)
    write_ground_truth(paths["ground_truth"], result.ground_truth)
    paths["summary"].write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n",
                                encoding="utf-8")
    return paths
