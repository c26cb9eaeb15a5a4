"""Generator for the bundled synthetic data set of three summer camps.

Each camp gets a roster, a weekly schedule, a mobility script, active windows,
absences, exemptions and a pipeline manifest. Camps sit at sites far apart so
their devices never meet; within a camp, groups use separate zones except for
shared blocks (welcoming, snack, pick-up).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .model import (
    ActivityBlock,
    Location,
    Participant,
    Role,
    Roster,
    Schedule,
    write_exemptions,
    write_roster,
    write_schedule,
)
from .preprocess import Absences, ActiveWindows, write_absences, write_active_windows
from .sim.mobility import MobilityScript, Segment, write_mobility

FIRST_DAY = "2020-08-17"
N_DAYS = 5
WAKE_MIN = 7 * 60 + 57  # storage inhibitor switched off
SLEEP_DELAY_MIN = 7  # inhibitor switched on after the day ends
SEDENTARY = {"board games", "newspaper", "crafts", "round table", "indoor lunch", "outdoor lunch",
             "snack", "theater"}

# (name, location, start_min, end_min, excluded, shared-by-all-groups)
Block = tuple[str, str, int, int, bool, bool]


@dataclass(frozen=True)
class CampSpec:
    camp_id: str
    groups: tuple[tuple[int, int], ...]  # (children, educators) per group
    day_start: int  # minutes after midnight
    day_end: int
    site: tuple[float, float]
    first_device: int


CAMPS = (
    CampSpec("am-pri", ((7, 2), (7, 2), (7, 1)), 8 * 60, 12 * 60 + 30, (0.0, 0.0), 1),
    CampSpec("day-pri", ((7, 3), (6, 2)), 8 * 60, 16 * 60 + 30, (2000.0, 0.0), 101),
    CampSpec("day-int", ((9, 2),), 8 * 60, 16 * 60 + 30, (4000.0, 0.0), 201),
)

AM_PRI_ROTATION = (
    ("woods", "outdoor"), ("soccer", "outdoor"), ("board games", "indoor"), ("newspaper", "indoor"),
    ("theater", "indoor"), ("team games", "indoor"), ("crafts", "indoor"),
)


def programme(camp_id: str, day: int, group: int) -> list[Block]:
    """Blocks of one group on one day; the last block ends before the pick-up."""
    if camp_id == "am-pri":
        a = AM_PRI_ROTATION[(3 * day + group) % 7]
        b = AM_PRI_ROTATION[(3 * day + group + 3) % 7]
        return [
            ("welcoming activity", "indoor", 480, 525, True, True),
            (a[0], a[1], 525, 615, False, False),
            ("snack", "indoor", 615, 630, False, True),
            (b[0], b[1], 630, 720, False, False),
        ]
    if camp_id == "day-pri":
        afternoon = ("swimming pool", "outdoor", 750, 960, True, False) if day % 2 == 0 else \
            ("team games", "outdoor", 750, 960, False, False)
        return [
            ("welcoming activity", "outdoor", 480, 510, True, True),
            ("team games", "outdoor", 510, 630, False, False),
            ("free play", "outdoor", 630, 690, False, True),
            ("indoor lunch", "indoor", 690, 750, False, False),
            afternoon,
            ("day closing", "outdoor", 960, 990, False, True),
        ]
    if day % 2 == 0:
        return [
            ("welcoming activity", "indoor", 480, 510, True, True),
            ("round table", "indoor", 510, 690, False, False),
            ("outdoor lunch", "outdoor", 690, 750, False, False),
            ("crafts", "indoor", 750, 930, False, False),
            ("day closing", "outdoor", 930, 990, False, False),
        ]
    return [
        ("welcoming activity", "indoor", 480, 510, True, True),
        ("hiking", "outdoor", 510, 750, False, False),
        ("outdoor lunch", "outdoor", 750, 810, False, False),
        ("team games", "indoor", 810, 930, False, False),
        ("free play", "indoor", 930, 990, False, False),
    ]


def _epoch_day(day: int) -> int:
    base = datetime.fromisoformat(FIRST_DAY).replace(tzinfo=timezone.utc)
    return int(base.timestamp()) + day * 86400


def _zone(site, dx, dy, w, h):
    x, y = site[0] + dx, site[1] + dy
    return (x, y, x + w, y + h)


@dataclass
class SyntheticCamp:
    roster: Roster
    schedule: Schedule
    mobility: MobilityScript
    windows: ActiveWindows
    absences: Absences
    exemptions: list[tuple[str, str]]
    simulation: dict

    def write(self, out: str | Path, seed: int = 0) -> Path:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_roster(out / "roster.csv", self.roster)
        write_schedule(out / "schedule.csv", self.schedule)
        write_mobility(out / "mobility.json", self.mobility)
        write_active_windows(out / "active_windows.csv", self.windows)
        write_absences(out / "absences.csv", self.absences)
        write_exemptions(out / "exemptions.csv", self.exemptions)
        manifest = {
            "seed": seed,
            "out": "out",
            "inputs": {
                "roster": "roster.csv",
                "schedule": "schedule.csv",
                "exemptions": "exemptions.csv",
                "mobility": "mobility.json",
                "active_windows": "active_windows.csv",
                "absences": "absences.csv",
            },
            "simulation": self.simulation,
            "preprocess": {"min_run": 5, "epsilon": 0.3, "margin": 900},
            "contacts": {"tau_time": 90, "tau_space": 2.0, "tau_len": 2},
        }
        with (out / "camp.yaml").open("w", encoding="utf-8") as fh:
            yaml.safe_dump(manifest, fh, sort_keys=False, default_flow_style=None)
        return out / "camp.yaml"


def generate_camp(seed: int = 0, camps: Sequence[str] | None = None, days: int = N_DAYS) -> SyntheticCamp:
    """Build the synthetic data set; ``camps`` restricts it to a subset."""
    rng = np.random.default_rng(seed)
    specs = [c for c in CAMPS if camps is None or c.camp_id in camps]
    if not specs:
        raise ValueError(f"no known camp among {camps}")

    participants: dict[str, Participant] = {}
    blocks: list[ActivityBlock] = []
    segments: list[Segment] = []
    windows: dict[str, list[tuple[int, int]]] = {}
    absences: dict[str, list[tuple[int, int]]] = {}
    exemptions: list[tuple[str, str]] = []
    inhibitors = []

    horizon_start = _epoch_day(0) + 7 * 3600 + 30 * 60
    horizon_end = _epoch_day(days - 1) + max(c.day_end for c in specs) * 60 + 45 * 60

    for spec in specs:
        site = spec.site
        members: list[list[str]] = []
        next_id = spec.first_device
        for g, (kids, edus) in enumerate(spec.groups):
            gid = f"{spec.camp_id}-g{g + 1}"
            ids = []
            for k in range(kids + edus):
                did = str(next_id)
                next_id += 1
                role = Role.CHILD if k < kids else Role.EDUCATOR
                participants[did] = Participant(did, role, gid, spec.camp_id)
                ids.append(did)
            members.append(ids)
        everyone = [d for ids in members for d in ids]

        # siblings in different groups when possible
        a = members[0][0]
        b = members[-1][1] if len(members) > 1 else members[0][1]
        exemptions.append((a, b))

        affinity: dict[str, dict[str, float]] = {}
        for ids in members:
            kids = [d for d in ids if participants[d].role is Role.CHILD]
            for d in ids:
                pool = [p for p in ids if p != d]
                if participants[d].role is Role.CHILD:
                    friends = rng.choice([p for p in kids if p != d], size=2, replace=False)
                    affinity[d] = {str(f): float(rng.uniform(0.3, 1.0)) for f in friends}
                else:
                    friends = rng.choice(pool, size=2, replace=False)
                    affinity[d] = {str(f): 0.1 for f in friends}

        bench_zone = _zone(site, -40.0, -40.0, 3.0, 3.0)
        bench = {}
        for i, d in enumerate(everyone):
            bench[d] = (bench_zone[0] + 0.45 * (i % 6) + 0.1, bench_zone[1] + 0.45 * (i // 6) + 0.1)
        shared_zone = _zone(site, -10.0, 30.0, 50.0, 30.0)

        def group_zone(g: int, location: str):
            if location == "indoor":
                return _zone(site, 80.0 * g, 0.0, 20.0, 16.0)
            return _zone(site, 80.0 * g, 80.0, 60.0, 60.0)

        inh_intervals = []
        cursor = horizon_start
        bench_start = {d: horizon_start for d in everyone}
        # one child per camp misses one day
        absentee = members[-1][0]
        absent_on = int(rng.integers(1, days)) if days > 1 else -1

        for day in range(days):
            base = _epoch_day(day)
            day_start = base + spec.day_start * 60
            day_end = base + spec.day_end * 60
            windows.setdefault(spec.camp_id, []).append((day_start, day_end))
            inh_intervals.append((cursor, base + WAKE_MIN * 60))
            cursor = day_end + SLEEP_DELAY_MIN * 60

            plans = [programme(spec.camp_id, day, g) for g in range(len(members))]
            for g, plan in enumerate(plans):
                gid = participants[members[g][0]].group_id
                for name, loc, s, e, excluded, _shared in plan:
                    blocks.append(ActivityBlock(spec.camp_id, gid, name, Location(loc),
                                                base + s * 60, base + e * 60, excluded))

            if day == absent_on:
                absences.setdefault(absentee, []).append((base + 7 * 3600, base + 18 * 3600))
            present = [d for d in everyone if not (day == absent_on and d == absentee)]
            pickup = {d: day_start + int(rng.integers(120, 360)) for d in present}
            drop = {d: day_end + int(rng.integers(60, 300)) for d in present}

            # absent devices simply stay on the bench
            for d in present:
                segments.append(Segment((d,), bench_start[d], pickup[d], bench_zone, "static",
                                        positions={d: bench[d]}))

            shared_blocks: dict[tuple[int, int, str], list[str]] = {}
            for g, plan in enumerate(plans):
                devs = [d for d in members[g] if d in pickup]
                if not devs:
                    continue
                for k, (name, loc, s, e, _excl, shared) in enumerate(plan):
                    s_abs, e_abs = base + s * 60, base + e * 60
                    zone = shared_zone if shared else group_zone(g, loc)
                    if k == 0:
                        # devices trickle in from the bench
                        for d in devs:
                            segments.append(Segment((d,), pickup[d], e_abs, zone, "waypoint",
                                                    affinity={d: affinity[d]}))
                    elif shared:
                        shared_blocks.setdefault((s_abs, e_abs, name), []).extend(devs)
                    else:
                        movement = "static" if name in SEDENTARY else "waypoint"
                        segments.append(Segment(tuple(devs), s_abs, e_abs, zone, movement,
                                                affinity={d: affinity[d] for d in devs}))
            for (s_abs, e_abs, name), devs in sorted(shared_blocks.items()):
                movement = "static" if name in SEDENTARY else "waypoint"
                segments.append(Segment(tuple(devs), s_abs, e_abs, shared_zone, movement,
                                        affinity={d: affinity[d] for d in devs}))
            for g, plan in enumerate(plans):
                last = base + plan[-1][3] * 60
                for d in members[g]:
                    if d in drop:
                        segments.append(Segment((d,), last, drop[d], shared_zone, "waypoint",
                                                affinity={d: affinity[d]}))
                        bench_start[d] = drop[d]
        inh_intervals.append((cursor, horizon_end))
        for d in everyone:
            segments.append(Segment((d,), bench_start[d], horizon_end, bench_zone, "static",
                                    positions={d: bench[d]}))
        inhibitors.append({
            "intervals": [list(iv) for iv in inh_intervals],
            "position": [bench_zone[0] + 1.5, bench_zone[1] + 1.5],
            "range": 15.0,
        })

    simulation = {
        "start": horizon_start,
        "end": horizon_end,
        "range_noise_sigma": 0.1,
        "inhibitors": inhibitors,
    }
    return SyntheticCamp(
        roster=Roster(participants),
        schedule=Schedule(tuple(blocks)),
        mobility=MobilityScript(tuple(segments)),
        windows=ActiveWindows(windows),
        absences=Absences(absences),
        exemptions=exemptions,
        simulation=simulation,
    )
