"""Input validation that collects every problem instead of stopping at the first."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .model import (
    EXEMPTION_HEADER,
    MEASUREMENT_HEADER,
    ROSTER_HEADER,
    SCHEDULE_HEADER,
    ActivityBlock,
    DataError,
    Location,
    Role,
    _parse_bool,
    find_overlaps,
    parse_measurement,
)
from .preprocess import ABSENCE_HEADER, ACTIVE_HEADER
from .sim.mobility import MobilityError, load_mobility

MAX_ROW_ISSUES = 50  # per file, so a broken measurement log does not flood the report


@dataclass(frozen=True)
class Issue:
    path: str
    line: int | None
    message: str

    def __str__(self) -> str:
        where = self.path if self.line is None else f"{self.path}:{self.line}"
        return f"{where}: {self.message}"


class _Collector:
    def __init__(self) -> None:
        self.issues: list[Issue] = []
        self._per_file: dict[str, int] = {}

    def add(self, path: Path, line: int | None, message: str) -> None:
        key = str(path)
        n = self._per_file.get(key, 0) + 1
        self._per_file[key] = n
        if n <= MAX_ROW_ISSUES:
            self.issues.append(Issue(key, line, message))
        elif n == MAX_ROW_ISSUES + 1:
            self.issues.append(Issue(key, None, "further issues in this file suppressed"))


def _rows(path: Path, header: tuple[str, ...], out: _Collector) -> Iterator[tuple[int, list[str]]]:
    if not path.exists():
        out.add(path, None, "file not found")
        return
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            return
        if tuple(c.strip() for c in first) != header:
            out.add(path, 1, f"expected header {','.join(header)}")
            return
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                out.add(path, lineno, f"expected {len(header)} fields, got {len(row)}")
                continue
            yield lineno, [c.strip() for c in row]


def _int(value: str, path: Path, line: int, what: str, out: _Collector) -> int | None:
    try:
        return int(value)
    except ValueError:
        out.add(path, line, f"{what} is not an integer: {value!r}")
        return None


def validate_inputs(
    roster: Path | None = None,
    schedule: Path | None = None,
    exemptions: Path | None = None,
    measurements: Path | None = None,
    active_windows: Path | None = None,
    absences: Path | None = None,
    mobility: Path | None = None,
    horizon: tuple[int, int] | None = None,
) -> list[Issue]:
    """Format and referential-integrity findings across the given input files."""
    out = _Collector()
    devices: dict[str, tuple[str, str]] = {}  # device -> (group, camp)
    group_camp: dict[str, str] = {}

    if roster is not None:
        for line, (did, role, gid, cid) in _rows(roster, ROSTER_HEADER, out):
            if not did or not gid or not cid:
                out.add(roster, line, "empty field")
                continue
            try:
                Role(role.lower())
            except ValueError:
                out.add(roster, line, f"unknown role {role!r}")
            if did in devices:
                out.add(roster, line, f"duplicate device id {did!r}")
            known = group_camp.setdefault(gid, cid)
            if known != cid:
                out.add(roster, line, f"group {gid!r} appears in camps {known!r} and {cid!r}")
            devices.setdefault(did, (gid, cid))
    have_roster = roster is not None and roster.exists()

    def check_device(path: Path, line: int, d: str) -> None:
        if have_roster and d not in devices:
            out.add(path, line, f"device {d!r} not in roster")

    if schedule is not None:
        blocks: list[ActivityBlock] = []
        lines: list[int] = []
        for line, (cid, gid, act, loc, s, e, excl) in _rows(schedule, SCHEDULE_HEADER, out):
            ok = True
            try:
                location = Location(loc.lower())
            except ValueError:
                out.add(schedule, line, f"unknown location {loc!r}")
                ok = False
            si = _int(s, schedule, line, "start", out)
            ei = _int(e, schedule, line, "end", out)
            if si is None or ei is None:
                continue
            if si >= ei:
                out.add(schedule, line, f"block start {si} is not before end {ei}")
                ok = False
            if not act:
                out.add(schedule, line, "empty activity name")
                ok = False
            try:
                excluded = _parse_bool(excl, "")
            except DataError:
                out.add(schedule, line, f"excluded is not a boolean: {excl!r}")
                ok = False
            if have_roster:
                if gid not in group_camp:
                    out.add(schedule, line, f"group {gid!r} not in roster")
                elif group_camp[gid] != cid:
                    out.add(schedule, line, f"group {gid!r} belongs to camp {group_camp[gid]!r}, not {cid!r}")
            if ok:
                blocks.append(ActivityBlock(cid, gid, act, location, si, ei, excluded))
                lines.append(line)
        for i, j in find_overlaps(blocks):
            out.add(schedule, lines[j],
                    f"block {lines[j]} ({blocks[j].activity_name}) overlaps block {lines[i]} "
                    f"({blocks[i].activity_name}) in group {blocks[i].group_id}")

    if exemptions is not None:
        for line, (a, b) in _rows(exemptions, EXEMPTION_HEADER, out):
            if a == b:
                out.add(exemptions, line, f"exemption of a device with itself: {a!r}")
            for d in (a, b):
                check_device(exemptions, line, d)

    if measurements is not None:
        unknown: dict[str, int] = {}
        for line, (a, b, ts, d) in _rows(measurements, MEASUREMENT_HEADER, out):
            try:
                m = parse_measurement(a, b, ts, d, where="")
            except DataError as exc:
                out.add(measurements, line, str(exc).lstrip(": "))
                continue
            if have_roster:
                for dev in (m.device_a, m.device_b):
                    if dev not in devices and dev not in unknown:
                        unknown[dev] = line
        for dev, line in sorted(unknown.items(), key=lambda kv: kv[1]):
            out.add(measurements, line, f"device {dev!r} not in roster (first seen here)")

    if active_windows is not None:
        per_camp: dict[str, list[tuple[int, int, int]]] = {}
        camps = {c for _, c in devices.values()}
        for line, (cid, s, e) in _rows(active_windows, ACTIVE_HEADER, out):
            si = _int(s, active_windows, line, "start", out)
            ei = _int(e, active_windows, line, "end", out)
            if si is None or ei is None:
                continue
            if si >= ei:
                out.add(active_windows, line, f"window start {si} is not before end {ei}")
                continue
            if have_roster and cid not in camps:
                out.add(active_windows, line, f"camp {cid!r} not in roster")
            per_camp.setdefault(cid, []).append((si, ei, line))
        for cid, ivs in per_camp.items():
            ivs.sort()
            for (s0, e0, l0), (s1, e1, l1) in zip(ivs, ivs[1:]):
                if s1 < e0:
                    out.add(active_windows, l1, f"window overlaps line {l0} for camp {cid!r}")

    if absences is not None:
        for line, (did, s, e) in _rows(absences, ABSENCE_HEADER, out):
            si = _int(s, absences, line, "start", out)
            ei = _int(e, absences, line, "end", out)
            if si is not None and ei is not None and si >= ei:
                out.add(absences, line, f"absence start {si} is not before end {ei}")
            check_device(absences, line, did)

    if mobility is not None:
        if not mobility.exists():
            out.add(mobility, None, "file not found")
        else:
            try:
                script = load_mobility(mobility)
            except (MobilityError, ValueError) as exc:
                out.add(mobility, None, str(exc))
            else:
                for seg in script.segments:
                    for d in seg.devices:
                        if have_roster and d not in devices:
                            out.add(mobility, None, f"segment at {seg.start} moves unknown device {d!r}")
                if horizon is not None and have_roster:
                    try:
                        gaps = script.coverage_gaps(sorted(devices), *horizon)
                    except MobilityError as exc:
                        out.add(mobility, None, str(exc))
                    else:
                        for d, s, e in gaps:
                            out.add(mobility, None, f"device {d} not covered over [{s}, {e})")
    return out.issues
