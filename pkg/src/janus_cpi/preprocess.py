"""Cleaning of raw measurements before contact extraction.

Three rules, applied in this order, each removed row being charged to exactly
one of them:

1. ``active``: keep only samples inside the camp's declared active windows;
2. ``absence``: drop samples involving a device during a declared absence;
3. ``constant_run``: drop runs of near-constant distance at the start of a day
   (devices still lying in storage).
"""

from __future__ import annotations

import bisect
import csv
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import lru_cache
from operator import itemgetter
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .model import DataError, RawMeasurement, Roster, pair_key

log = logging.getLogger(__name__)

ACTIVE_HEADER = ("camp_id", "start", "end")
ABSENCE_HEADER = ("device_id", "start", "end")
RULES = ("active", "absence", "constant_run")


@lru_cache(maxsize=None)
def day_of(timestamp: int) -> str:
    return datetime.fromtimestamp(timestamp - timestamp % 86400, tz=timezone.utc).date().isoformat()


def _intervals_sorted(intervals: Iterable[tuple[int, int]], what: str) -> tuple[tuple[int, int], ...]:
    ivs = sorted((int(s), int(e)) for s, e in intervals)
    for s, e in ivs:
        if s >= e:
            raise DataError(f"{what}: interval [{s}, {e}) is empty")
    return tuple(ivs)


class _IntervalSet:
    """Union of half-open intervals with O(log n) membership."""

    __slots__ = ("starts", "ends")

    def __init__(self, ivs: Sequence[tuple[int, int]]):
        merged: list[list[int]] = []
        for s, e in sorted(ivs):
            if merged and s <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], e)
            else:
                merged.append([s, e])
        self.starts = [s for s, _ in merged]
        self.ends = [e for _, e in merged]

    def __contains__(self, t: int) -> bool:
        i = bisect.bisect_right(self.starts, t) - 1
        return i >= 0 and t < self.ends[i]


@dataclass(frozen=True)
class ActiveWindows:
    """Per-camp half-open intervals during which activities took place."""

    windows: Mapping[str, tuple[tuple[int, int], ...]]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        fixed = {}
        for camp, ivs in self.windows.items():
            ivs = _intervals_sorted(ivs, f"active windows of {camp}")
            for (s0, e0), (s1, e1) in zip(ivs, ivs[1:]):
                if s1 < e0:
                    raise DataError(f"active windows of {camp} overlap: [{s0},{e0}) and [{s1},{e1})")
            fixed[camp] = ivs
        object.__setattr__(self, "windows", fixed)
        object.__setattr__(self, "_index", {c: _IntervalSet(v) for c, v in fixed.items()})

    def is_active(self, camp_id: str, t: int) -> bool:
        idx = self._index.get(camp_id)
        return idx is not None and t in idx

    def day_start(self, camp_id: str, day: str) -> int | None:
        for s, _ in self.windows.get(camp_id, ()):
            if day_of(s) == day:
                return s
        return None

    def day_starts(self) -> dict[tuple[str, str], int]:
        out: dict[tuple[str, str], int] = {}
        for camp, ivs in self.windows.items():
            for s, _ in ivs:
                out.setdefault((camp, day_of(s)), s)
        return out

    @property
    def empty(self) -> bool:
        return not any(self.windows.values())


@dataclass(frozen=True)
class Absences:
    """Declared absence intervals per device."""

    intervals: Mapping[str, tuple[tuple[int, int], ...]]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        fixed = {d: _intervals_sorted(v, f"absences of {d}") for d, v in self.intervals.items()}
        object.__setattr__(self, "intervals", fixed)
        object.__setattr__(self, "_index", {d: _IntervalSet(v) for d, v in fixed.items()})

    def absent(self, device_id: str, t: int) -> bool:
        idx = self._index.get(device_id)
        return idx is not None and t in idx


def _read(path: str | Path, header: tuple[str, ...]) -> list[tuple[int, list[str]]]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            return []
        if tuple(c.strip() for c in first) != header:
            raise DataError(f"{path}:1: expected header {','.join(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
            rows.append((lineno, [c.strip() for c in row]))
        return rows


def _grouped_intervals(path: str | Path, header: tuple[str, ...]) -> dict[str, list[tuple[int, int]]]:
    out: dict[str, list[tuple[int, int]]] = defaultdict(list)
    for lineno, (key, s, e) in _read(path, header):
        try:
            si, ei = int(s), int(e)
        except ValueError:
            raise DataError(f"{path}:{lineno}: start/end must be integers") from None
        if si >= ei:
            raise DataError(f"{path}:{lineno}: start {si} is not before end {ei}")
        out[key].append((si, ei))
    return dict(out)


def load_active_windows(path: str | Path) -> ActiveWindows:
    return ActiveWindows(_grouped_intervals(path, ACTIVE_HEADER))


def load_absences(path: str | Path, roster: Roster | None = None) -> Absences:
    raw = _grouped_intervals(path, ABSENCE_HEADER)
    if roster is not None:
        unknown = sorted(d for d in raw if d not in roster)
        if unknown:
            raise DataError(f"{path}: absences for unknown devices {', '.join(unknown)}")
    return Absences(raw)


def write_active_windows(path: str | Path, windows: ActiveWindows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ACTIVE_HEADER)
        for camp in sorted(windows.windows):
            w.writerows((camp, s, e) for s, e in windows.windows[camp])


def write_absences(path: str | Path, absences: Absences) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ABSENCE_HEADER)
        for d in sorted(absences.intervals):
            w.writerows((d, s, e) for s, e in absences.intervals[d])


class _CampLookup(dict):
    """Memoised camp of ``device_a`` per measurement."""

    def __init__(self, roster: Roster):
        super().__init__()
        self.roster = roster

    def __missing__(self, device_id: str) -> str:
        if device_id not in self.roster:
            raise DataError(f"device {device_id!r} is not in the roster")
        camp = self[device_id] = self.roster.camp_of(device_id)
        return camp


def filter_active(
    measurements: Iterable[RawMeasurement], windows: ActiveWindows, roster: Roster
) -> tuple[list[RawMeasurement], Counter]:
    """Keep samples inside an active window of the camp of ``device_a``.

    Returns the kept rows, in input order, and the number dropped per UTC day.
    """
    if windows.empty:
        log.warning("no active windows declared; every measurement is dropped")
    camp = _CampLookup(roster)
    kept, dropped = [], Counter()
    for m in measurements:
        if windows.is_active(camp[m.device_a], m.timestamp):
            kept.append(m)
        else:
            dropped[day_of(m.timestamp)] += 1
    return kept, dropped


def drop_absences(
    measurements: Iterable[RawMeasurement], absences: Absences
) -> tuple[list[RawMeasurement], Counter]:
    """Drop samples taken while either device was declared absent; input order is kept."""
    if not absences.intervals:
        return list(measurements), Counter()
    kept, dropped = [], Counter()
    for m in measurements:
        if absences.absent(m.device_a, m.timestamp) or absences.absent(m.device_b, m.timestamp):
            dropped[day_of(m.timestamp)] += 1
        else:
            kept.append(m)
    return kept, dropped


def drop_constant_runs(
    measurements: Iterable[RawMeasurement],
    windows: ActiveWindows,
    roster: Roster,
    min_run: int = 5,
    epsilon: float = 0.05,
    margin: int = 900,
) -> tuple[list[RawMeasurement], Counter]:
    """Remove storage-bench runs at the start of each day.

    For every pair and day, the leading samples that stay within ``epsilon`` of the
    first one and fall before ``day start + margin`` form a run; runs of at least
    ``min_run`` samples are removed, and the check is repeated on what remains so
    that the rule is idempotent. Runs later in the day are left alone.
    """
    if min_run < 2:
        raise ValueError("min_run must be at least 2")
    starts = windows.day_starts()
    camp = _CampLookup(roster)
    by_pair_day: dict[tuple, list[RawMeasurement]] = defaultdict(list)
    for m in measurements:
        by_pair_day[(m.device_a, m.device_b, day_of(m.timestamp))].append(m)

    kept, dropped = [], Counter()
    for key in sorted(by_pair_day, key=lambda k: (pair_key(k[:2]), k[2])):
        rows = by_pair_day[key]
        rows.sort()  # same pair, so this orders by (timestamp, distance)
        day = key[2]
        s0 = starts.get((camp[key[0]], day))
        i = 0
        if s0 is not None:
            limit = s0 + margin
            while i < len(rows) and rows[i].timestamp < limit:
                first = rows[i].distance
                j = i
                while j < len(rows) and rows[j].timestamp < limit and abs(rows[j].distance - first) <= epsilon:
                    j += 1
                if j - i < min_run:
                    break
                dropped[day] += j - i
                i = j
        kept.extend(rows[i:])
    return kept, dropped


@dataclass(frozen=True)
class PreprocessParams:
    min_run: int = 5
    epsilon: float = 0.05
    margin: int = 900

    def __post_init__(self) -> None:
        if self.min_run < 2 or self.epsilon < 0 or self.margin < 0:
            raise ValueError("invalid preprocessing parameters")


@dataclass
class PreprocessResult:
    measurements: list[RawMeasurement]
    drops: dict[str, Counter]
    report: dict


def preprocess(
    measurements: Sequence[RawMeasurement],
    windows: ActiveWindows,
    absences: Absences,
    roster: Roster,
    params: PreprocessParams = PreprocessParams(),
) -> PreprocessResult:
    # the constant-run rule regroups by pair and day, so its output is sorted
    step, d_active = filter_active(measurements, windows, roster)
    step, d_absence = drop_absences(step, absences)
    step, d_const = drop_constant_runs(step, windows, roster, params.min_run, params.epsilon, params.margin)
    drops = {"active": d_active, "absence": d_absence, "constant_run": d_const}
    return PreprocessResult(step, drops, preprocess_report(measurements, step, roster, drops))


def preprocess_report(
    before: Sequence[RawMeasurement],
    after: Sequence[RawMeasurement],
    roster: Roster,
    drops: Mapping[str, Mapping[str, int]] | None = None,
) -> dict:
    """Per-camp raw and filtered counts plus per-rule drop counts.

    Drop counts per rule are reported per camp when the rows can be attributed;
    the per-day breakdown comes from ``drops``.
    """
    camp = _CampLookup(roster)
    pair_counts = Counter(map(itemgetter(0, 1), before))
    span: dict[str, list[int]] = {}
    for a, _b, t, _d in before:
        lo_hi = span.get(a)
        if lo_hi is None:
            span[a] = [t, t]
        elif t < lo_hi[0]:
            lo_hi[0] = t
        elif t > lo_hi[1]:
            lo_hi[1] = t
    camp_span: dict[str, list[int]] = {}
    for a, (lo, hi) in span.items():
        c = camp_span.setdefault(camp[a], [lo, hi])
        c[0], c[1] = min(c[0], lo), max(c[1], hi)
    raw: Counter = Counter()
    users: dict[str, set[str]] = defaultdict(set)
    for (a, b), n in pair_counts.items():
        c = camp[a]
        raw[c] += n
        users[c].update((a, b))
    filtered = Counter()
    for (a, _b), n in Counter(map(itemgetter(0, 1), after)).items():
        filtered[camp[a]] += n
    camps: dict[str, dict] = {}
    for c in sorted(set(raw) | set(filtered) | set(roster.camps)):
        lo_hi = camp_span.get(c)
        camps[c] = {
            "camp_id": c,
            "initial_day": day_of(lo_hi[0]) if lo_hi else None,
            "final_day": day_of(lo_hi[1]) if lo_hi else None,
            "unique_users": len(users.get(c, ())),
            "raw": raw.get(c, 0),
            "filtered": filtered.get(c, 0),
        }
    rules = {}
    for rule in RULES:
        per_day = dict(sorted((drops or {}).get(rule, {}).items()))
        rules[rule] = {"total": int(sum(per_day.values())), "per_day": per_day}
    return {
        "camps": [camps[c] for c in sorted(camps)],
        "rules": rules,
        "raw_total": len(before),
        "filtered_total": len(after),
    }
