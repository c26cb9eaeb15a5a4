"""Zone/waypoint mobility scripts keyed to the activity schedule.

A script is a list of segments. Each segment moves a set of devices inside a
rectangular zone over ``[start, end)``, either parked at one spot (``static``) or
walking between random waypoints (``waypoint``). Affinity weights bias the choice
of a spot or waypoint towards a partner's current position, which is what creates
clusters of close contacts.
"""

from __future__ import annotations

import bisect
import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from ..model import device_key

TRANSITION_S = 1.0


class MobilityError(ValueError):
    """The mobility script is malformed or does not cover the simulated horizon."""


@dataclass(frozen=True)
class Segment:
    devices: tuple[str, ...]
    start: int
    end: int
    zone: tuple[float, float, float, float]
    movement: str = "waypoint"
    speed: tuple[float, float] = (0.3, 1.2)
    pause: tuple[float, float] = (5.0, 60.0)
    affinity: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    affinity_radius: tuple[float, float] = (0.4, 1.2)
    positions: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        x0, y0, x1, y1 = self.zone
        if not (x1 > x0 and y1 > y0):
            raise MobilityError(f"zone {self.zone} has no area")
        if self.start >= self.end:
            raise MobilityError(f"segment [{self.start}, {self.end}) is empty")
        if self.movement not in ("static", "waypoint"):
            raise MobilityError(f"unknown movement {self.movement!r}")
        if self.speed[0] <= 0 or self.speed[1] < self.speed[0]:
            raise MobilityError(f"bad speed range {self.speed}")
        if self.pause[0] < 0 or self.pause[1] < self.pause[0]:
            raise MobilityError(f"bad pause range {self.pause}")

    def inside(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.zone
        return x0 <= x <= x1 and y0 <= y <= y1

    def clip(self, x: float, y: float) -> tuple[float, float]:
        x0, y0, x1, y1 = self.zone
        return min(max(x, x0), x1), min(max(y, y0), y1)


@dataclass(frozen=True)
class MobilityScript:
    segments: tuple[Segment, ...]

    def segments_for(self, device_id: str) -> list[Segment]:
        return sorted((s for s in self.segments if device_id in s.devices), key=lambda s: s.start)

    def coverage_gaps(self, devices: Iterable[str], start: int, end: int) -> list[tuple[str, int, int]]:
        gaps = []
        for d in devices:
            cursor = start
            for seg in self.segments_for(d):
                if seg.end <= cursor:
                    continue
                if seg.start > cursor:
                    gaps.append((d, cursor, min(seg.start, end)))
                    if seg.start >= end:
                        break
                if seg.start < cursor and seg.start >= start:
                    raise MobilityError(
                        f"device {d}: overlapping segments around t={seg.start}"
                    )
                cursor = max(cursor, seg.end)
                if cursor >= end:
                    break
            if cursor < end:
                gaps.append((d, cursor, end))
        return gaps

    def validate(self, devices: Iterable[str], start: int, end: int) -> None:
        gaps = self.coverage_gaps(devices, start, end)
        if gaps:
            d, s, e = gaps[0]
            more = f" (and {len(gaps) - 1} more)" if len(gaps) > 1 else ""
            raise MobilityError(f"mobility does not cover device {d} over [{s}, {e}){more}")

    def to_json(self) -> dict:
        segs = []
        for s in self.segments:
            item = {
                "devices": list(s.devices),
                "start": s.start,
                "end": s.end,
                "zone": list(s.zone),
                "movement": s.movement,
                "speed": list(s.speed),
                "pause": list(s.pause),
                "affinity_radius": list(s.affinity_radius),
            }
            if s.affinity:
                item["affinity"] = {d: dict(w) for d, w in s.affinity.items()}
            if s.positions:
                item["positions"] = {d: list(p) for d, p in s.positions.items()}
            segs.append(item)
        return {"segments": segs}

    @classmethod
    def from_json(cls, data: Mapping) -> "MobilityScript":
        try:
            segs = []
            for raw in data["segments"]:
                segs.append(
                    Segment(
                        devices=tuple(str(d) for d in raw["devices"]),
                        start=int(raw["start"]),
                        end=int(raw["end"]),
                        zone=tuple(float(v) for v in raw["zone"]),
                        movement=raw.get("movement", "waypoint"),
                        speed=tuple(raw.get("speed", (0.3, 1.2))),
                        pause=tuple(raw.get("pause", (5.0, 60.0))),
                        affinity={
                            str(d): {str(p): float(w) for p, w in ws.items()}
                            for d, ws in raw.get("affinity", {}).items()
                        },
                        affinity_radius=tuple(raw.get("affinity_radius", (0.4, 1.2))),
                        positions={
                            str(d): (float(p[0]), float(p[1]))
                            for d, p in raw.get("positions", {}).items()
                        },
                    )
                )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, MobilityError):
                raise
            raise MobilityError(f"malformed mobility script: {exc!r}") from None
        return cls(tuple(segs))


def load_mobility(path: str | Path) -> MobilityScript:
    path = Path(path)
    return MobilityScript.from_json(json.loads(path.read_text(encoding="utf-8")))


def write_mobility(path: str | Path, script: MobilityScript) -> None:
    Path(path).write_text(json.dumps(script.to_json(), indent=1, sort_keys=True) + "\n",
                          encoding="utf-8")


class _Snapshot(Mapping):
    """Positions of all devices at one instant, interpolated on first access."""

    __slots__ = ("_traj", "_t", "_pos")

    def __init__(self, traj: "Trajectories", t: float):
        self._traj = traj
        self._t = t
        self._pos: dict[str, np.ndarray] = {}

    def __getitem__(self, device_id: str) -> np.ndarray:
        hit = self._pos.get(device_id)
        if hit is None:
            hit = self._pos[device_id] = self._traj.position(device_id, self._t)
        return hit

    def __iter__(self):
        return iter(self._traj.devices)

    def __len__(self) -> int:
        return len(self._traj.devices)


class Trajectories:
    """Piecewise-linear device paths with cached position lookups."""

    def __init__(self, paths: Mapping[str, tuple[np.ndarray, np.ndarray, np.ndarray]]):
        self.paths = dict(paths)
        self.devices = sorted(self.paths, key=device_key)
        self._lists = {d: (list(ts), list(xs), list(ys)) for d, (ts, xs, ys) in self.paths.items()}
        self._cache: dict[int, _Snapshot] = {}

    def position(self, device_id: str, t: float) -> np.ndarray:
        ts, xs, ys = self._lists[device_id]
        i = bisect.bisect_right(ts, t)
        if i == 0:
            return np.array([xs[0], ys[0]])
        if i >= len(ts):
            return np.array([xs[-1], ys[-1]])
        f = (t - ts[i - 1]) / (ts[i] - ts[i - 1])
        return np.array([xs[i - 1] + f * (xs[i] - xs[i - 1]), ys[i - 1] + f * (ys[i] - ys[i - 1])])

    def positions_at(self, t: float) -> Mapping[str, np.ndarray]:
        key = int(t) if float(t).is_integer() else None
        if key is not None:
            hit = self._cache.get(key)
            if hit is not None:
                return hit
        out = _Snapshot(self, t)
        if key is not None:
            if len(self._cache) > 4096:
                self._cache.clear()
            self._cache[key] = out
        return out


class _Path:
    __slots__ = ("t", "x", "y")

    def __init__(self) -> None:
        self.t: list[float] = []
        self.x: list[float] = []
        self.y: list[float] = []

    def add(self, t: float, x: float, y: float) -> None:
        if self.t and t <= self.t[-1]:
            if x == self.x[-1] and y == self.y[-1]:
                return
            t = self.t[-1] + 1e-6
        self.t.append(t)
        self.x.append(x)
        self.y.append(y)

    def at(self, t: float) -> tuple[float, float]:
        i = bisect.bisect_right(self.t, t)
        if i == 0:
            return self.x[0], self.y[0]
        if i >= len(self.t):
            return self.x[-1], self.y[-1]
        t0, t1 = self.t[i - 1], self.t[i]
        f = (t - t0) / (t1 - t0)
        return (self.x[i - 1] + f * (self.x[i] - self.x[i - 1]),
                self.y[i - 1] + f * (self.y[i] - self.y[i - 1]))


def build_trajectories(
    script: MobilityScript,
    devices: Iterable[str],
    start: int,
    end: int,
    rng: np.random.Generator,
) -> Trajectories:
    """Generate device paths over ``[start, end)`` from the script."""
    devices = sorted(devices, key=device_key)
    script.validate(devices, start, end)
    segs = {d: [s for s in script.segments_for(d) if s.end > start and s.start < end] for d in devices}
    paths = {d: _Path() for d in devices}
    seg_index = {d: 0 for d in devices}
    entered: dict[str, int] = {d: -1 for d in devices}
    order = {d: i for i, d in enumerate(devices)}

    def uniform_point(seg: Segment) -> tuple[float, float]:
        x0, y0, x1, y1 = seg.zone
        return float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1))

    def pick(d: str, seg: Segment, t: float) -> tuple[float, float]:
        weights = seg.affinity.get(d, {})
        partners = []
        for p, w in sorted(weights.items(), key=lambda kv: device_key(kv[0])):
            if w <= 0 or p not in paths or not paths[p].t:
                continue
            px, py = paths[p].at(t)
            if seg.inside(px, py):
                partners.append((p, w, px, py))
        total = sum(w for _, w, _, _ in partners)
        if partners and rng.random() < total / (1.0 + total):
            probs = np.array([w for _, w, _, _ in partners]) / total
            _, _, px, py = partners[int(rng.choice(len(partners), p=probs))]
            r = rng.uniform(*seg.affinity_radius)
            theta = rng.uniform(0.0, 2.0 * math.pi)
            return seg.clip(px + r * math.cos(theta), py + r * math.sin(theta))
        return uniform_point(seg)

    heap = [(float(start), order[d], d) for d in devices]
    heapq.heapify(heap)
    while heap:
        t, _, d = heapq.heappop(heap)
        if t >= end:
            continue
        path = paths[d]
        lst = segs[d]
        i = seg_index[d]
        while i < len(lst) and lst[i].end <= t:
            i += 1
        seg_index[d] = i
        seg = lst[i]
        stop = min(seg.end, end)
        if entered[d] != i:
            entered[d] = i
            if d in seg.positions:
                pos = seg.positions[d]
            elif seg.movement == "static" or not path.t or not seg.inside(path.x[-1], path.y[-1]):
                pos = pick(d, seg, t)
            else:
                pos = (path.x[-1], path.y[-1])
            t_in = t + TRANSITION_S if path.t else t
            path.add(t_in, *pos)
            if seg.movement == "static":
                path.add(stop, *pos)
                heapq.heappush(heap, (float(stop), order[d], d))
                continue
            t = t_in
        x, y = path.x[-1], path.y[-1]
        tx, ty = pick(d, seg, t)
        speed = rng.uniform(*seg.speed)
        arrive = t + math.hypot(tx - x, ty - y) / speed
        if arrive >= stop:
            frac = (stop - t) / (arrive - t) if arrive > t else 1.0
            path.add(stop, x + frac * (tx - x), y + frac * (ty - y))
            heapq.heappush(heap, (float(stop), order[d], d))
            continue
        path.add(arrive, tx, ty)
        leave = min(max(arrive + rng.uniform(*seg.pause), t + 1.0), stop)
        path.add(leave, tx, ty)
        heapq.heappush(heap, (float(leave), order[d], d))

    arrays = {
        d: (np.asarray(p.t, dtype=float), np.asarray(p.x, dtype=float), np.asarray(p.y, dtype=float))
        for d, p in paths.items()
    }
    return Trajectories(arrays)
