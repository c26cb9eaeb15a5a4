"""Aggregation of pairwise measurement streams into close-proximity contacts.

Per device pair, samples from both devices are merged and time-sorted, then split
whenever two consecutive samples are ``tau_time`` or more seconds apart, then
split again greedily whenever a sample would widen the distance spread of the
current run beyond ``tau_space``. Runs shorter than ``tau_len`` samples are
discarded; each remaining run becomes one contact with its first timestamp, its
time span and its median distance.

Streams handed to the splitting functions are sequences of
``(timestamp, distance)`` tuples sorted by timestamp.
"""

from __future__ import annotations

import csv
import statistics
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .model import (
    ActivityBlock,
    DataError,
    RawMeasurement,
    Role,
    Roster,
    Schedule,
    pair_key,
)

CONTACT_HEADER = (
    "device_a", "device_b", "start", "duration_s", "distance_m", "n_measurements",
    "group_a", "group_b", "role_a", "role_b", "activity", "intra_group",
)

Sample = tuple[int, float]


@dataclass(frozen=True)
class ContactParams:
    tau_time: float = 90
    tau_space: float = 2.0
    tau_len: int = 2
    # cut intra-group streams at the group's activity boundaries so that a contact
    # never outlasts the block it is tagged with
    split_at_activity_boundaries: bool = True

    def __post_init__(self) -> None:
        if self.tau_time <= 0 or self.tau_space <= 0:
            raise ValueError("tau_time and tau_space must be positive")
        if self.tau_len < 2:
            raise ValueError("tau_len must be at least 2")


@dataclass(frozen=True, slots=True)
class Contact:
    device_a: str
    device_b: str
    start: int
    duration: int
    distance: float
    n_measurements: int
    group_a: str = ""
    group_b: str = ""
    role_a: Role | None = None
    role_b: Role | None = None
    activity: str | None = None
    intra_group: bool = False
    crosses_boundary: bool = False

    @property
    def pair(self) -> tuple[str, str]:
        return (self.device_a, self.device_b)

    @property
    def end(self) -> int:
        return self.start + self.duration

    @property
    def roles(self) -> tuple[Role | None, Role | None]:
        return (self.role_a, self.role_b)


@dataclass
class ExtractionStats:
    pairs: int = 0
    measurements: int = 0
    duplicate_timestamps: int = 0
    subsequences: int = 0
    fragments_dropped: int = 0
    exempted: int = 0
    excluded_activity: int = 0
    boundary_crossings: int = 0


def split_temporal(stream: Sequence[Sample], tau_time: float) -> list[list[Sample]]:
    """Cut the stream wherever consecutive timestamps are >= ``tau_time`` apart."""
    out: list[list[Sample]] = []
    cur: list[Sample] = []
    last = None
    for item in stream:
        if cur and item[0] - last >= tau_time:
            out.append(cur)
            cur = []
        cur.append(item)
        last = item[0]
    if cur:
        out.append(cur)
    return out


def split_spatial(sub: Sequence[Sample], tau_space: float) -> list[list[Sample]]:
    """Greedy left-to-right split keeping each run's distance spread <= ``tau_space``.

    The sample that would break the bound seeds the next run.
    """
    out: list[list[Sample]] = []
    cur: list[Sample] = []
    lo = hi = 0.0
    for item in sub:
        d = item[1]
        if cur:
            nlo, nhi = min(lo, d), max(hi, d)
            if nhi - nlo > tau_space:
                out.append(cur)
                cur = [item]
                lo = hi = d
                continue
            lo, hi = nlo, nhi
            cur.append(item)
        else:
            cur = [item]
            lo = hi = d
    if cur:
        out.append(cur)
    return out


def aggregate(
    sub: Sequence[Sample], tau_len: int = 2, device_a: str = "", device_b: str = ""
) -> Contact | None:
    if len(sub) < tau_len:
        return None
    start = sub[0][0]
    return Contact(
        device_a=device_a,
        device_b=device_b,
        start=start,
        duration=sub[-1][0] - start,
        distance=statistics.median(d for _, d in sub),
        n_measurements=len(sub),
    )


def merge_duplicates(stream: Sequence[Sample]) -> tuple[list[Sample], int]:
    """Average distances of samples sharing a timestamp (e.g. both directions)."""
    out: list[Sample] = []
    merged = 0
    i = 0
    n = len(stream)
    while i < n:
        t = stream[i][0]
        j = i + 1
        while j < n and stream[j][0] == t:
            j += 1
        if j - i == 1:
            out.append(stream[i])
        else:
            out.append((t, sum(d for _, d in stream[i:j]) / (j - i)))
            merged += j - i - 1
        i = j
    return out, merged


def _cut_at(stream: list[Sample], cuts: Sequence[int]) -> list[list[Sample]]:
    if not cuts:
        return [stream]
    pieces: list[list[Sample]] = []
    cur: list[Sample] = []
    k = 0
    for item in stream:
        while k < len(cuts) and item[0] >= cuts[k]:
            if cur:
                pieces.append(cur)
                cur = []
            k += 1
        cur.append(item)
    if cur:
        pieces.append(cur)
    return pieces


def pair_contacts(stream: Sequence[Sample], params: ContactParams,
                  stats: ExtractionStats | None = None,
                  cuts: Sequence[int] = ()) -> list[tuple[int, int, float, int]]:
    """Untagged contacts of one pair as ``(start, duration, distance, n)`` tuples."""
    found = []
    for piece in _cut_at(list(stream), cuts):
        for temporal in split_temporal(piece, params.tau_time):
            for sub in split_spatial(temporal, params.tau_space):
                if stats is not None:
                    stats.subsequences += 1
                c = aggregate(sub, params.tau_len)
                if c is None:
                    if stats is not None:
                        stats.fragments_dropped += 1
                    continue
                found.append((c.start, c.duration, c.distance, c.n_measurements))
    return found


def _block_cuts(schedule: Schedule | None, group_id: str, lo: int, hi: int) -> list[int]:
    if schedule is None:
        return []
    cuts = set()
    for b in schedule.blocks:
        if b.group_id == group_id and b.end > lo and b.start <= hi:
            cuts.add(b.start)
            cuts.add(b.end)
    return sorted(cuts)


def extract_contacts(
    measurements: Iterable[RawMeasurement],
    params: ContactParams,
    roster: Roster,
    schedule: Schedule | None = None,
    exemptions: Iterable[tuple[str, str]] = (),
    stats: ExtractionStats | None = None,
) -> list[Contact]:
    """Build tagged contacts from preprocessed measurements.

    Exempted pairs produce nothing; intra-group contacts take the activity of the
    block holding their start and are dropped when that block is excluded.
    Results are ordered by pair, then start.
    """
    if stats is None:
        stats = ExtractionStats()
    exempt = set(exemptions)
    streams: dict[tuple[str, str], list[Sample]] = defaultdict(list)
    for m in measurements:
        streams[(m.device_a, m.device_b)].append((m.timestamp, m.distance))
        stats.measurements += 1

    missing = sorted({d for pair in streams for d in pair if d not in roster})
    if missing:
        raise DataError(f"devices missing from roster: {', '.join(missing)}")

    contacts: list[Contact] = []
    for pair in sorted(streams, key=pair_key):
        stats.pairs += 1
        stream = sorted(streams[pair])
        stream, merged = merge_duplicates(stream)
        stats.duplicate_timestamps += merged
        a, b = pair
        pa, pb = roster[a], roster[b]
        intra = pa.group_id == pb.group_id
        cuts: list[int] = []
        if intra and params.split_at_activity_boundaries:
            cuts = _block_cuts(schedule, pa.group_id, stream[0][0], stream[-1][0])
        found = pair_contacts(stream, params, stats, cuts)
        if pair in exempt:
            stats.exempted += len(found)
            continue
        for start, duration, distance, n in found:
            block: ActivityBlock | None = None
            crosses = False
            if intra and schedule is not None:
                block = schedule.activity_at(pa.group_id, start)
                if block is not None:
                    if block.excluded:
                        stats.excluded_activity += 1
                        continue
                    crosses = start + duration >= block.end
                elif schedule.activity_at(pa.group_id, start + duration) is not None:
                    crosses = True
            if crosses:
                stats.boundary_crossings += 1
            contacts.append(
                Contact(
                    device_a=a,
                    device_b=b,
                    start=start,
                    duration=duration,
                    distance=distance,
                    n_measurements=n,
                    group_a=pa.group_id,
                    group_b=pb.group_id,
                    role_a=pa.role,
                    role_b=pb.role,
                    activity=block.activity_name if block is not None else None,
                    intra_group=intra,
                    crosses_boundary=crosses,
                )
            )
    return contacts


def write_contacts(path: str | Path, contacts: Iterable[Contact]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CONTACT_HEADER)
        for c in contacts:
            w.writerow((
                c.device_a, c.device_b, c.start, c.duration, repr(float(c.distance)),
                c.n_measurements, c.group_a, c.group_b,
                c.role_a.value if c.role_a else "", c.role_b.value if c.role_b else "",
                c.activity or "", "true" if c.intra_group else "false",
            ))


def load_contacts(path: str | Path) -> list[Contact]:
    path = Path(path)
    out = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return out
        if tuple(header) != CONTACT_HEADER:
            raise DataError(f"{path}:1: unexpected contacts header")
        for lineno, row in enumerate(reader, start=2):
            try:
                a, b, start, dur, dist, n, ga, gb, ra, rb, act, intra = row
                out.append(Contact(
                    a, b, int(start), int(dur), float(dist), int(n), ga, gb,
                    Role(ra) if ra else None, Role(rb) if rb else None,
                    act or None, intra == "true",
                ))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return out


def contacts_report(contacts: Sequence[Contact], schedule: Schedule | None, roster: Roster) -> dict:
    """Per-camp contact counts, mean samples per contact and activity tagging."""
    by_camp: dict[str, list[Contact]] = defaultdict(list)
    for c in contacts:
        by_camp[roster.camp_of(c.device_a)].append(c)
    rows = []
    for camp in sorted(set(by_camp) | set(roster.camps)):
        cs = by_camp.get(camp, [])
        tagged = sum(1 for c in cs if c.activity is not None)
        n = len(cs)
        rows.append({
            "camp_id": camp,
            "contacts": n,
            "mean_measurements": round(sum(c.n_measurements for c in cs) / n, 6) if n else None,
            "groups": len(roster.groups(camp)),
            "activities": len(schedule.activity_names(camp)) if schedule else 0,
            "activities_considered": (
                len(schedule.activity_names(camp, include_excluded=False)) if schedule else 0
            ),
            "activity_tagged": tagged,
            "activity_tagged_pct": round(100.0 * tagged / n, 6) if n else None,
            "boundary_crossing": sum(1 for c in cs if c.crosses_boundary),
        })
    return {"camps": rows, "total_contacts": len(contacts)}
