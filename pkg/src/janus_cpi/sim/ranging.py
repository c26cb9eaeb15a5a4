"""Single-sided two-way ranging and the slot-coordinated ranging window."""

from __future__ import annotations

import math
from typing import Callable, Mapping, NamedTuple

import numpy as np

from ..model import RawMeasurement, canonical_pair
from .config import SPEED_OF_LIGHT, SimConfig
from .discovery import NodeState


class TwrExchange(NamedTuple):
    """Timestamps of a poll/response exchange, initiator poll sent at t=0."""

    poll_tx: float
    poll_rx: float
    resp_tx: float
    resp_rx: float

    @property
    def t_round(self) -> float:
        return self.resp_rx - self.poll_tx

    @property
    def t_reply(self) -> float:
        return self.resp_tx - self.poll_rx

    def time_of_flight(self) -> float:
        return (self.t_round - self.t_reply) / 2.0


def sstwr_exchange(true_distance: float, reply_delay: float, c: float = SPEED_OF_LIGHT) -> TwrExchange:
    tof = true_distance / c
    poll_rx = tof
    resp_tx = poll_rx + reply_delay
    return TwrExchange(0.0, poll_rx, resp_tx, resp_tx + tof)


def sstwr_range(
    true_distance: float,
    reply_delay: float,
    noise_sigma: float,
    rng: np.random.Generator | None = None,
    c: float = SPEED_OF_LIGHT,
) -> float:
    """Distance estimated by the initiator from one SS-TWR exchange.

    Gaussian noise of ``noise_sigma`` metres is added and the result floored at 0.
    """
    if true_distance < 0:
        raise ValueError("true_distance must be non-negative")
    if reply_delay <= 0:
        raise ValueError("reply_delay must be positive")
    ex = sstwr_exchange(true_distance, reply_delay, c)
    d = c * ex.time_of_flight()
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("an rng is required when noise_sigma > 0")
        d += rng.normal(0.0, noise_sigma)
    return max(d, 0.0)


class GroundTruth(NamedTuple):
    device_a: str
    device_b: str
    timestamp: int
    true_distance: float


def ranging_round(
    node: NodeState,
    nodes: Mapping[str, NodeState],
    positions_at: Callable[[int], Mapping[str, np.ndarray]],
    config: SimConfig,
    rng: np.random.Generator,
    window_start: float,
    ground_truth: list[GroundTruth] | None = None,
) -> list[RawMeasurement]:
    """Run one ranging window of ``node`` acting as responder.

    Every neighbour holding a slot initiates an exchange at
    ``window_start + slot * slot_width``; the initiator logs the result.
    """
    out: list[RawMeasurement] = []
    if not node.awake(window_start):
        return out
    for neighbor_id, slot in sorted(node.slots().items(), key=lambda kv: kv[1]):
        t = window_start + slot * config.slot_width
        ts = int(math.floor(t))
        other = nodes[neighbor_id]
        if not (node.awake(t) and other.awake(t)):
            continue
        pos = positions_at(ts)
        pa, pb = pos[node.device_id], pos[neighbor_id]
        true_d = math.hypot(float(pa[0]) - float(pb[0]), float(pa[1]) - float(pb[1]))
        if true_d > config.detection_range:
            continue
        a, b = canonical_pair(node.device_id, neighbor_id)
        if ground_truth is not None:
            ground_truth.append(GroundTruth(a, b, ts, true_d))
        measured = sstwr_range(true_d, config.reply_delay, config.range_noise_sigma, rng,
                               config.speed_of_light)
        if measured > config.max_range:
            continue
        out.append(RawMeasurement(a, b, ts, measured))
    return out
