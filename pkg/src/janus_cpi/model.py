"""Shared data model and CSV formats for measurements, rosters, schedules and exemptions.

Device ids are opaque strings. Pairs are always stored in canonical order, where
purely numeric ids compare numerically (so ``"2" < "10"``) and sort before
non-numeric ids, which compare lexicographically.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, NamedTuple

DEFAULT_MAX_RANGE = 10.0

MEASUREMENT_HEADER = ("device_a", "device_b", "timestamp", "distance_m")
ROSTER_HEADER = ("device_id", "role", "group_id", "camp_id")
EXEMPTION_HEADER = ("device_a", "device_b")
SCHEDULE_HEADER = ("camp_id", "group_id", "activity", "location", "start", "end", "excluded")


class DataError(ValueError):
    """Input data violates a file format or a model invariant."""


class Role(str, Enum):
    CHILD = "child"
    EDUCATOR = "educator"


class Location(str, Enum):
    INDOOR = "indoor"
    OUTDOOR = "outdoor"


def device_key(device_id: str) -> tuple:
    if device_id.isdigit():
        return (0, int(device_id), device_id)
    return (1, 0, device_id)


def canonical_pair(a: str, b: str) -> tuple[str, str]:
    if a == b:
        raise DataError(f"pair with identical devices: {a!r}")
    return (a, b) if device_key(a) < device_key(b) else (b, a)


def pair_key(pair: tuple[str, str]) -> tuple:
    return (device_key(pair[0]), device_key(pair[1]))


class RawMeasurement(NamedTuple):
    """One timestamped distance sample between two devices (canonical order)."""

    device_a: str
    device_b: str
    timestamp: int
    distance: float

    @property
    def pair(self) -> tuple[str, str]:
        return (self.device_a, self.device_b)


@dataclass(frozen=True)
class Participant:
    device_id: str
    role: Role
    group_id: str
    camp_id: str


@dataclass(frozen=True)
class Roster:
    participants: dict[str, Participant]

    def __post_init__(self) -> None:
        camp_of_group: dict[str, str] = {}
        for p in self.participants.values():
            known = camp_of_group.setdefault(p.group_id, p.camp_id)
            if known != p.camp_id:
                raise DataError(
                    f"group {p.group_id!r} appears in camps {known!r} and {p.camp_id!r}"
                )

    def __contains__(self, device_id: str) -> bool:
        return device_id in self.participants

    def __getitem__(self, device_id: str) -> Participant:
        return self.participants[device_id]

    def __len__(self) -> int:
        return len(self.participants)

    @property
    def device_ids(self) -> list[str]:
        return sorted(self.participants, key=device_key)

    @property
    def camps(self) -> list[str]:
        return sorted({p.camp_id for p in self.participants.values()})

    def camp_of(self, device_id: str) -> str:
        return self.participants[device_id].camp_id

    def groups(self, camp_id: str | None = None) -> list[str]:
        return sorted(
            {
                p.group_id
                for p in self.participants.values()
                if camp_id is None or p.camp_id == camp_id
            }
        )

    def camp_of_group(self, group_id: str) -> str | None:
        for p in self.participants.values():
            if p.group_id == group_id:
                return p.camp_id
        return None

    def members(self, camp_id: str | None = None) -> list[Participant]:
        return [
            self.participants[d]
            for d in self.device_ids
            if camp_id is None or self.participants[d].camp_id == camp_id
        ]


@dataclass(frozen=True)
class ActivityBlock:
    camp_id: str
    group_id: str
    activity_name: str
    location: Location
    start: int
    end: int
    excluded: bool = False

    @property
    def duration(self) -> int:
        return self.end - self.start

    def contains(self, timestamp: float) -> bool:
        return self.start <= timestamp < self.end


@dataclass(frozen=True)
class Schedule:
    """Activity blocks indexed per group for half-open interval lookup."""

    blocks: tuple[ActivityBlock, ...]
    _by_group: dict[str, tuple[list[int], list[ActivityBlock]]] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        for b in self.blocks:
            if b.start >= b.end:
                raise DataError(f"block {b.activity_name!r} for {b.group_id!r} has start >= end")
        overlaps = find_overlaps(self.blocks)
        if overlaps:
            listing = "; ".join(
                f"#{i} {self.blocks[i].activity_name}[{self.blocks[i].start},{self.blocks[i].end}) "
                f"overlaps #{j} {self.blocks[j].activity_name}[{self.blocks[j].start},{self.blocks[j].end})"
                f" in group {self.blocks[i].group_id}"
                for i, j in overlaps
            )
            raise DataError(f"overlapping activity blocks: {listing}")
        index: dict[str, tuple[list[int], list[ActivityBlock]]] = {}
        for b in sorted(self.blocks, key=lambda b: (b.start, b.end)):
            starts, blocks = index.setdefault(b.group_id, ([], []))
            starts.append(b.start)
            blocks.append(b)
        object.__setattr__(self, "_by_group", index)

    def __iter__(self):
        return iter(self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def activity_at(self, group_id: str, timestamp: float) -> ActivityBlock | None:
        entry = self._by_group.get(group_id)
        if entry is None:
            return None
        starts, blocks = entry
        i = bisect.bisect_right(starts, timestamp) - 1
        if i >= 0 and blocks[i].contains(timestamp):
            return blocks[i]
        return None

    def for_camp(self, camp_id: str) -> list[ActivityBlock]:
        return [b for b in self.blocks if b.camp_id == camp_id]

    def activity_names(self, camp_id: str | None = None, include_excluded: bool = True) -> list[str]:
        return sorted(
            {
                b.activity_name
                for b in self.blocks
                if (camp_id is None or b.camp_id == camp_id)
                and (include_excluded or not b.excluded)
            }
        )

    def total_duration(self, activity_name: str, camp_id: str | None = None) -> int:
        return sum(
            b.duration
            for b in self.blocks
            if b.activity_name == activity_name and (camp_id is None or b.camp_id == camp_id)
        )


def find_overlaps(blocks: tuple[ActivityBlock, ...] | list[ActivityBlock]) -> list[tuple[int, int]]:
    """Index pairs of blocks of the same group whose intervals intersect."""
    by_group: dict[str, list[int]] = {}
    for i, b in enumerate(blocks):
        by_group.setdefault(b.group_id, []).append(i)
    found = []
    for idx in by_group.values():
        idx.sort(key=lambda i: (blocks[i].start, blocks[i].end))
        # compare against the block reaching furthest so chains of overlaps are all reported
        reach = None
        for i in idx:
            if reach is not None and blocks[i].start < blocks[reach].end:
                found.append((reach, i))
            if reach is None or blocks[i].end > blocks[reach].end:
                reach = i
    return sorted(found)


def activity_at(schedule: Schedule, group_id: str, timestamp: float) -> ActivityBlock | None:
    """Return the block of ``group_id`` whose ``[start, end)`` contains ``timestamp``."""
    return schedule.activity_at(group_id, timestamp)


# -- parsing helpers ---------------------------------------------------------


def _read_rows(path: str | Path, header: tuple[str, ...]) -> Iterable[tuple[int, list[str]]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            return
        if tuple(c.strip() for c in first) != header:
            raise DataError(f"{path}:1: expected header {','.join(header)}, got {','.join(first)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            yield lineno, [c.strip() for c in row]


def _parse_int(value: str, what: str, where: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise DataError(f"{where}: {what} is not an integer: {value!r}") from None


def _parse_bool(value: str, where: str) -> bool:
    v = value.lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no", ""):
        return False
    raise DataError(f"{where}: not a boolean: {value!r}")


def parse_measurement(
    a: str, b: str, timestamp: str, distance: str, where: str = "<row>"
) -> RawMeasurement:
    if not a or not b:
        raise DataError(f"{where}: empty device id")
    if a == b:
        raise DataError(f"{where}: device measured against itself: {a!r}")
    ts = _parse_int(timestamp, "timestamp", where)
    if ts < 0:
        raise DataError(f"{where}: negative timestamp {ts}")
    try:
        d = float(distance)
    except ValueError:
        raise DataError(f"{where}: distance is not a number: {distance!r}") from None
    if math.isnan(d) or d < 0 or math.isinf(d):
        raise DataError(f"{where}: invalid distance {distance!r}")
    if device_key(b) < device_key(a):
        a, b = b, a
    return RawMeasurement(a, b, ts, d)


def sort_measurements(rows: Iterable[RawMeasurement]) -> list[RawMeasurement]:
    """Order by canonical pair, then timestamp, then distance."""
    by_pair: dict[tuple[str, str], list[RawMeasurement]] = {}
    for m in rows:
        group = by_pair.get((m.device_a, m.device_b))
        if group is None:
            group = by_pair[(m.device_a, m.device_b)] = []
        group.append(m)
    out: list[RawMeasurement] = []
    for pair in sorted(by_pair, key=pair_key):
        group = by_pair[pair]
        # within one pair the natural tuple order is (timestamp, distance)
        group.sort()
        out.extend(group)
    return out


def load_measurements(
    path: str | Path, max_range: float = DEFAULT_MAX_RANGE
) -> tuple[list[RawMeasurement], int]:
    """Load a measurement CSV.

    Returns the measurements sorted by (pair, timestamp) and the number of rows
    dropped because their distance exceeds ``max_range``.
    """
    rows = []
    dropped = 0
    path = Path(path)
    order: dict[tuple[str, str], bool] = {}  # pair -> needs swapping
    if not path.exists():
        raise FileNotFoundError(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            return rows, 0
        if tuple(c.strip() for c in first) != MEASUREMENT_HEADER:
            raise DataError(f"{path}:1: expected header {','.join(MEASUREMENT_HEADER)}, got {','.join(first)}")
        for lineno, row in enumerate(reader, start=2):
            # fast path for well-formed rows; anything unusual goes through the full parser
            try:
                a, b, ts, d = row
                t = int(ts)
                dist = float(d)
            except ValueError:
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) != len(MEASUREMENT_HEADER):
                    raise DataError(f"{path}:{lineno}: expected {len(MEASUREMENT_HEADER)} fields, "
                                    f"got {len(row)}") from None
                t, dist = -1, math.nan
            swap = order.get((a, b))
            if swap is None or t < 0 or not (0.0 <= dist < math.inf):
                m = parse_measurement(a.strip(), b.strip(), ts.strip(), d.strip(), where=f"{path}:{lineno}")
                if a == a.strip() and b == b.strip():
                    order[(a, b)] = m.device_a != a
                # padded ids are never cached, so they keep taking the full parser
            elif swap:
                m = RawMeasurement(b, a, t, dist)
            else:
                m = RawMeasurement(a, b, t, dist)
            if m.distance > max_range:
                dropped += 1
                continue
            rows.append(m)
    return sort_measurements(rows), dropped


def write_measurements(path: str | Path, rows: Iterable[RawMeasurement]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MEASUREMENT_HEADER)
        w.writerows((m.device_a, m.device_b, m.timestamp, repr(float(m.distance))) for m in rows)


def load_roster(path: str | Path) -> Roster:
    path = Path(path)
    participants: dict[str, Participant] = {}
    for lineno, (device_id, role, group_id, camp_id) in _read_rows(path, ROSTER_HEADER):
        where = f"{path}:{lineno}"
        if not device_id or not group_id or not camp_id:
            raise DataError(f"{where}: empty field")
        try:
            role_v = Role(role.lower())
        except ValueError:
            raise DataError(f"{where}: unknown role {role!r}") from None
        if device_id in participants:
            raise DataError(f"{where}: duplicate device id {device_id!r}")
        participants[device_id] = Participant(device_id, role_v, group_id, camp_id)
    return Roster(participants)


def write_roster(path: str | Path, roster: Roster) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROSTER_HEADER)
        for p in roster.members():
            w.writerow((p.device_id, p.role.value, p.group_id, p.camp_id))


def load_exemptions(path: str | Path, roster: Roster | None = None) -> frozenset[tuple[str, str]]:
    path = Path(path)
    pairs = set()
    for lineno, (a, b) in _read_rows(path, EXEMPTION_HEADER):
        where = f"{path}:{lineno}"
        if a == b:
            raise DataError(f"{where}: exemption of a device with itself: {a!r}")
        if roster is not None:
            for d in (a, b):
                if d not in roster:
                    raise DataError(f"{where}: exemption references unknown device {d!r}")
        pairs.add(canonical_pair(a, b))
    return frozenset(pairs)


def write_exemptions(path: str | Path, pairs: Iterable[tuple[str, str]]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EXEMPTION_HEADER)
        w.writerows(sorted((canonical_pair(a, b) for a, b in pairs), key=pair_key))


def load_schedule(path: str | Path, roster: Roster | None = None) -> Schedule:
    path = Path(path)
    blocks: list[ActivityBlock] = []
    lines: list[int] = []
    for lineno, (camp_id, group_id, activity, location, start, end, excluded) in _read_rows(
        path, SCHEDULE_HEADER
    ):
        where = f"{path}:{lineno}"
        try:
            loc = Location(location.lower())
        except ValueError:
            raise DataError(f"{where}: unknown location {location!r}") from None
        s = _parse_int(start, "start", where)
        e = _parse_int(end, "end", where)
        if s >= e:
            raise DataError(f"{where}: block start {s} is not before end {e}")
        if not activity:
            raise DataError(f"{where}: empty activity name")
        if roster is not None:
            known = roster.camp_of_group(group_id)
            if known is None:
                raise DataError(f"{where}: unknown group {group_id!r}")
            if known != camp_id:
                raise DataError(f"{where}: group {group_id!r} belongs to camp {known!r}, not {camp_id!r}")
        blocks.append(ActivityBlock(camp_id, group_id, activity, loc, s, e, _parse_bool(excluded, where)))
        lines.append(lineno)
    overlaps = find_overlaps(blocks)
    if overlaps:
        listing = "; ".join(
            f"line {lines[i]} ({blocks[i].activity_name}) overlaps line {lines[j]} "
            f"({blocks[j].activity_name}) in group {blocks[i].group_id}"
            for i, j in overlaps
        )
        raise DataError(f"{path}: overlapping activity blocks: {listing}")
    return Schedule(tuple(blocks))


def write_schedule(path: str | Path, schedule: Schedule) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCHEDULE_HEADER)
        for b in schedule.blocks:
            w.writerow(
                (b.camp_id, b.group_id, b.activity_name, b.location.value, b.start, b.end,
                 "true" if b.excluded else "false")
            )
