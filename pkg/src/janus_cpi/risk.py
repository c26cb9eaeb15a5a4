"""Contagion-risk classification of contacts and the analyses built on it."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .contacts import Contact
from .model import DataError, Role, Roster, Schedule, pair_key


class RiskLevel(str, Enum):
    HIGH = "High"
    MEDIUM_HIGH = "MediumHigh"
    MEDIUM_LOW = "MediumLow"
    LOW = "Low"

    @property
    def rank(self) -> int:
        """0 for Low up to 3 for High."""
        return _RANK[self]


LEVELS = (RiskLevel.HIGH, RiskLevel.MEDIUM_HIGH, RiskLevel.MEDIUM_LOW, RiskLevel.LOW)
_RANK = {RiskLevel.HIGH: 3, RiskLevel.MEDIUM_HIGH: 2, RiskLevel.MEDIUM_LOW: 1, RiskLevel.LOW: 0}


@dataclass(frozen=True)
class Tier:
    min_duration: float  # seconds, inclusive
    max_distance: float  # metres, inclusive


@dataclass(frozen=True)
class RiskThresholds:
    high: Tier = Tier(15 * 60, 1.0)
    medium_high: Tier = Tier(10 * 60, 2.0)
    medium_low: Tier = Tier(5 * 60, 4.0)

    def __post_init__(self) -> None:
        ladder = (self.high, self.medium_high, self.medium_low)
        for upper, lower in zip(ladder, ladder[1:]):
            if not (upper.min_duration > lower.min_duration and upper.max_distance < lower.max_distance):
                raise ValueError("risk tiers must loosen strictly from High to MediumLow")

    def tiers(self) -> tuple[tuple[RiskLevel, Tier], ...]:
        return (
            (RiskLevel.HIGH, self.high),
            (RiskLevel.MEDIUM_HIGH, self.medium_high),
            (RiskLevel.MEDIUM_LOW, self.medium_low),
        )

    @classmethod
    def from_mapping(cls, data: Mapping) -> "RiskThresholds":
        kw = {}
        for name in ("high", "medium_high", "medium_low"):
            if name in data:
                dur, dist = data[name]
                kw[name] = Tier(float(dur), float(dist))
        return cls(**kw)


DEFAULT_THRESHOLDS = RiskThresholds()


def classify(duration: float, distance: float, thresholds: RiskThresholds = DEFAULT_THRESHOLDS) -> RiskLevel:
    """First tier whose duration floor and distance ceiling are both met; Low otherwise."""
    for level, tier in thresholds.tiers():
        if duration >= tier.min_duration and distance <= tier.max_distance:
            return level
    return RiskLevel.LOW


def _empty_levels(value=0.0) -> dict[str, float]:
    return {lvl.value: value for lvl in LEVELS}


def time_share_by_risk(contacts: Iterable[Contact], thresholds: RiskThresholds = DEFAULT_THRESHOLDS) -> dict:
    """Share of total contact time, and contact counts, per risk level."""
    seconds = _empty_levels(0)
    counts = _empty_levels(0)
    for c in contacts:
        lvl = classify(c.duration, c.distance, thresholds).value
        seconds[lvl] += c.duration
        counts[lvl] += 1
    total = sum(seconds.values())
    percent = {k: (100.0 * v / total if total else 0.0) for k, v in seconds.items()}
    return {
        "percent": percent,
        "seconds": seconds,
        "counts": {k: int(v) for k, v in counts.items()},
        "total_seconds": total,
        "empty": total == 0,
    }


@dataclass(frozen=True)
class PairPoint:
    device_a: str
    device_b: str
    duration: float
    distance: float
    level: RiskLevel
    n_contacts: int


def pair_views(contacts: Iterable[Contact], thresholds: RiskThresholds = DEFAULT_THRESHOLDS) -> dict[str, list[PairPoint]]:
    """One point per pair under three aggregations: ``mean``, ``max_duration``, ``min_distance``.

    Ties on the longest duration go to the closer contact; ties on the smallest
    distance go to the longer contact.
    """
    by_pair: dict[tuple[str, str], list[Contact]] = defaultdict(list)
    for c in contacts:
        by_pair[c.pair].append(c)
    views: dict[str, list[PairPoint]] = {"mean": [], "max_duration": [], "min_distance": []}
    for pair in sorted(by_pair, key=pair_key):
        cs = by_pair[pair]
        n = len(cs)
        mean_dur = sum(c.duration for c in cs) / n
        mean_dist = sum(c.distance for c in cs) / n
        longest = min(cs, key=lambda c: (-c.duration, c.distance, c.start))
        closest = min(cs, key=lambda c: (c.distance, -c.duration, c.start))
        a, b = pair
        for name, dur, dist in (
            ("mean", mean_dur, mean_dist),
            ("max_duration", longest.duration, longest.distance),
            ("min_distance", closest.duration, closest.distance),
        ):
            views[name].append(PairPoint(a, b, dur, dist, classify(dur, dist, thresholds), n))
    return views


ROLE_PAIRS = ("child-child", "child-educator", "educator-educator")
SCOPES = ("intra", "inter")


def role_pair(a: Role | None, b: Role | None) -> str:
    ra = a.value if a else "child"
    rb = b.value if b else "child"
    return "-".join(sorted((ra, rb)))


@dataclass
class Cell:
    seconds: float = 0.0
    count: int = 0
    level_seconds: dict[str, float] = field(default_factory=lambda: _empty_levels(0.0))

    @property
    def minutes(self) -> float:
        return self.seconds / 60.0

    def level_percent(self) -> dict[str, float] | None:
        if self.seconds <= 0:
            return None
        return {k: 100.0 * v / self.seconds for k, v in self.level_seconds.items()}


@dataclass
class GroupRoleBreakdown:
    cells: dict[tuple[str, str], Cell]
    groups: int

    @property
    def total_seconds(self) -> float:
        return sum(c.seconds for c in self.cells.values())

    @property
    def total_count(self) -> int:
        return sum(c.count for c in self.cells.values())

    def to_dict(self) -> dict:
        rows = []
        total = self.total_seconds
        for scope in SCOPES:
            for rp in ROLE_PAIRS:
                cell = self.cells[(scope, rp)]
                # inter-group cells do not exist in a single-group camp
                na = scope == "inter" and self.groups < 2
                rows.append({
                    "scope": scope,
                    "roles": rp,
                    "time_min": None if na else cell.minutes,
                    "count": None if na else cell.count,
                    "time_share_pct": None if na or not total else 100.0 * cell.seconds / total,
                    "level_time_pct": None if na else cell.level_percent(),
                })
        return {"groups": self.groups, "cells": rows,
                "total_time_min": total / 60.0, "total_count": self.total_count}


def group_role_breakdown(
    contacts: Iterable[Contact], roster: Roster, thresholds: RiskThresholds = DEFAULT_THRESHOLDS,
    camp_id: str | None = None,
) -> GroupRoleBreakdown:
    cells = {(s, r): Cell() for s in SCOPES for r in ROLE_PAIRS}
    for c in contacts:
        try:
            pa, pb = roster[c.device_a], roster[c.device_b]
        except KeyError as exc:
            raise DataError(f"device {exc.args[0]!r} missing from roster") from None
        scope = "intra" if pa.group_id == pb.group_id else "inter"
        cell = cells[(scope, role_pair(pa.role, pb.role))]
        cell.seconds += c.duration
        cell.count += 1
        cell.level_seconds[classify(c.duration, c.distance, thresholds).value] += c.duration
    return GroupRoleBreakdown(cells, len(roster.groups(camp_id)))


@dataclass
class ActivityRiskProfile:
    activity: str
    scheduled_seconds: int
    level_seconds: dict[str, float]
    contacts: int

    @property
    def contact_seconds(self) -> float:
        return sum(self.level_seconds.values())

    def bars(self) -> dict[str, float]:
        """Contact time per unit of scheduled time, per level."""
        return {k: v / self.scheduled_seconds for k, v in self.level_seconds.items()}

    def percent(self) -> dict[str, float] | None:
        total = self.contact_seconds
        if total <= 0:
            return None
        return {k: 100.0 * v / total for k, v in self.level_seconds.items()}


def activity_profiles(
    contacts: Iterable[Contact], schedule: Schedule, thresholds: RiskThresholds = DEFAULT_THRESHOLDS,
    camp_id: str | None = None,
) -> dict[str, ActivityRiskProfile]:
    """Risk per unit time of each scheduled, non-excluded activity.

    Scheduled time of an activity sums all its blocks over groups and days.
    """
    names = schedule.activity_names(camp_id, include_excluded=False)
    scheduled: dict[str, int] = defaultdict(int)
    for b in schedule.blocks:
        if not b.excluded and (camp_id is None or b.camp_id == camp_id):
            scheduled[b.activity_name] += b.duration
    profiles = {n: ActivityRiskProfile(n, scheduled[n], _empty_levels(0.0), 0) for n in names}
    known = set(schedule.activity_names(camp_id))
    for c in contacts:
        if c.activity is None:
            continue
        if c.activity not in known:
            raise DataError(f"contact tagged with unscheduled activity {c.activity!r}")
        prof = profiles.get(c.activity)
        if prof is None:
            continue
        prof.level_seconds[classify(c.duration, c.distance, thresholds).value] += c.duration
        prof.contacts += 1
    return profiles
