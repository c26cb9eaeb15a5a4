"""Report assembly, text tables, plot-ready CSVs and their JSON schemas."""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import jsonschema

from .contacts import Contact
from .model import Roster, Schedule
from .risk import (
    LEVELS,
    DEFAULT_THRESHOLDS,
    RiskThresholds,
    activity_profiles,
    group_role_breakdown,
    pair_views,
    time_share_by_risk,
)

DASH = "–"
REPORT_NAMES = ("table4", "table5", "table6", "fig4", "fig5", "fig7")

FIG4_HEADER = ("camp_id", "level", "time_pct", "time_s", "contacts")
FIG5_HEADER = ("camp_id", "view", "device_a", "device_b", "duration_s", "distance_m", "level", "n_contacts")
FIG6_HEADER = ("camp_id", "scope", "roles", "time_min", "count", "level", "level_time_pct")
FIG7_HEADER = ("camp_id", "activity", "scheduled_min", "level", "contact_time_per_unit", "level_time_pct",
               "contacts")


def _by_camp(contacts: Iterable[Contact], roster: Roster) -> dict[str, list[Contact]]:
    out: dict[str, list[Contact]] = defaultdict(list)
    for c in contacts:
        out[roster.camp_of(c.device_a)].append(c)
    return out


def risk_reports(
    contacts: Sequence[Contact],
    roster: Roster,
    schedule: Schedule | None,
    thresholds: RiskThresholds = DEFAULT_THRESHOLDS,
) -> dict[str, dict]:
    """Every risk analysis, per camp, as JSON-ready dicts keyed by report name."""
    grouped = _by_camp(contacts, roster)
    camps = sorted(set(grouped) | set(roster.camps))
    fig4, fig5, table5, fig7 = [], [], [], []
    for camp in camps:
        cs = grouped.get(camp, [])
        share = time_share_by_risk(cs, thresholds)
        fig4.append({"camp_id": camp, **share})

        views = pair_views(cs, thresholds)
        fig5.append({
            "camp_id": camp,
            "pairs": len(views["mean"]),
            "views": {
                name: [
                    {"device_a": p.device_a, "device_b": p.device_b, "duration_s": p.duration,
                     "distance_m": p.distance, "level": p.level.value, "n_contacts": p.n_contacts}
                    for p in pts
                ]
                for name, pts in views.items()
            },
            "level_fraction": {
                name: {
                    lvl.value: (sum(1 for p in pts if p.level is lvl) / len(pts) if pts else 0.0)
                    for lvl in LEVELS
                }
                for name, pts in views.items()
            },
        })

        breakdown = group_role_breakdown(cs, roster, thresholds, camp_id=camp)
        table5.append({"camp_id": camp, **breakdown.to_dict()})

        profiles = (
            activity_profiles(cs, schedule, thresholds, camp_id=camp) if schedule is not None else {}
        )
        fig7.append({
            "camp_id": camp,
            "activities": [
                {
                    "activity": name,
                    "scheduled_min": prof.scheduled_seconds / 60.0,
                    "contacts": prof.contacts,
                    "contact_time_min": prof.contact_seconds / 60.0,
                    "bars": prof.bars(),
                    "level_time_pct": prof.percent(),
                }
                for name, prof in sorted(profiles.items())
            ],
        })
    return {
        "fig4": {"camps": fig4},
        "fig5": {"camps": fig5},
        "table5": {"camps": table5},
        "fig7": {"camps": fig7},
    }


# -- schemas -----------------------------------------------------------------


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("janus_cpi.schemas").joinpath(f"{name}.schema.json").read_text("utf-8")
    return json.loads(text)


def validate_report(name: str, data: Mapping) -> None:
    """Raise ``jsonschema.ValidationError`` if ``data`` does not match the schema."""
    jsonschema.validate(data, load_schema(name))


# -- text tables ---------------------------------------------------------------


def _fmt(v, digits: int = 2) -> str:
    if v is None:
        return DASH
    if isinstance(v, float):
        return f"{v:.{digits}f}"
    return str(v)


def _table(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    rows = [list(map(str, r)) for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    line = "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()
    sep = "  ".join("-" * w for w in widths)
    body = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join([line, sep, *body]) + "\n"


def render_table4(report: Mapping) -> str:
    rows = []
    for r in report["camps"]:
        acts = str(r["activities"])
        if r["activities_considered"] != r["activities"]:
            acts += f" ({r['activities_considered']})"
        pct = DASH if r["activity_tagged_pct"] is None else f"{r['activity_tagged_pct']:.2f}%"
        rows.append((r["camp_id"], r["contacts"], _fmt(r["mean_measurements"]), r["groups"], acts,
                     f"{r['activity_tagged']} ({pct})"))
    return _table(("camp", "contacts", "avg_measurements", "groups", "activities", "activity_tagged"), rows)


def render_table5(report: Mapping) -> str:
    header = ["camp", "metric"] + [f"{c['scope']}:{c['roles']}" for c in report["camps"][0]["cells"]] \
        if report["camps"] else ["camp", "metric"]
    rows = []
    for r in report["camps"]:
        rows.append([r["camp_id"], "time_min"] + [_fmt(c["time_min"]) for c in r["cells"]])
        rows.append(["", "count"] + [_fmt(c["count"]) for c in r["cells"]])
    return _table(header, rows)


def render_table6(report: Mapping) -> str:
    rows = [
        (r["camp_id"], _fmt(r["initial_day"]), _fmt(r["final_day"]), r["unique_users"], r["raw"], r["filtered"])
        for r in report["camps"]
    ]
    text = _table(("camp", "initial_day", "final_day", "unique_users", "raw", "filtered"), rows)
    drops = ", ".join(f"{k}={v['total']}" for k, v in report["rules"].items())
    return text + f"dropped by rule: {drops}\n"


# -- plot-ready CSVs -------------------------------------------------------------


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(["" if v is None else v for v in row] for row in rows)


def write_plot_csvs(reports: Mapping[str, Mapping], out: Path) -> list[Path]:
    paths = []
    p = out / "fig4_time_share.csv"
    _write_csv(p, FIG4_HEADER, (
        (c["camp_id"], lvl.value, c["percent"][lvl.value], c["seconds"][lvl.value], c["counts"][lvl.value])
        for c in reports["fig4"]["camps"] for lvl in LEVELS
    ))
    paths.append(p)
    p = out / "fig5_pair_views.csv"
    _write_csv(p, FIG5_HEADER, (
        (c["camp_id"], view, pt["device_a"], pt["device_b"], pt["duration_s"], pt["distance_m"],
         pt["level"], pt["n_contacts"])
        for c in reports["fig5"]["camps"] for view, pts in c["views"].items() for pt in pts
    ))
    paths.append(p)
    p = out / "fig6_group_role.csv"
    _write_csv(p, FIG6_HEADER, (
        (c["camp_id"], cell["scope"], cell["roles"], cell["time_min"], cell["count"], lvl.value,
         None if cell["level_time_pct"] is None else cell["level_time_pct"][lvl.value])
        for c in reports["table5"]["camps"] for cell in c["cells"] for lvl in LEVELS
    ))
    paths.append(p)
    p = out / "fig7_activity.csv"
    _write_csv(p, FIG7_HEADER, (
        (c["camp_id"], a["activity"], a["scheduled_min"], lvl.value, a["bars"][lvl.value],
         None if a["level_time_pct"] is None else a["level_time_pct"][lvl.value], a["contacts"])
        for c in reports["fig7"]["camps"] for a in c["activities"] for lvl in LEVELS
    ))
    paths.append(p)
    return paths


def dump_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
