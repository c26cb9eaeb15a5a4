"""Run manifests and the simulate / pipeline drivers behind the CLI."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from .contacts import ContactParams, ExtractionStats, contacts_report, extract_contacts, write_contacts
from .model import (
    DataError,
    RawMeasurement,
    Roster,
    Schedule,
    load_exemptions,
    load_measurements,
    load_roster,
    load_schedule,
)
from .preprocess import (
    Absences,
    ActiveWindows,
    PreprocessParams,
    load_absences,
    load_active_windows,
    preprocess,
)
from .reports import (
    dump_json,
    render_table4,
    render_table5,
    render_table6,
    risk_reports,
    validate_report,
    write_plot_csvs,
)
from .risk import RiskThresholds
from .sim import ConfigError, MobilityError, SimConfig, load_mobility, run_simulation, write_simulation

log = logging.getLogger(__name__)

FORMATS = ("json", "csv", "table")
SWEEPABLE = ("tau_time", "tau_space", "tau_len")
INPUT_KEYS = ("roster", "schedule", "exemptions", "mobility", "measurements", "active_windows", "absences")
THREADS_ENV = "JANUS_CPI_THREADS"


class UsageError(Exception):
    """Bad invocation or configuration; maps to exit code 2."""


class StageError(Exception):
    """A data error raised inside a named pipeline stage; maps to exit code 1."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass
class RunManifest:
    base_dir: Path
    out: Path
    seed: int = 0
    inputs: dict[str, Path] = field(default_factory=dict)
    simulation: dict[str, Any] = field(default_factory=dict)
    preprocess: PreprocessParams = PreprocessParams()
    contacts: ContactParams = ContactParams()
    risk: RiskThresholds = RiskThresholds()
    sweep: dict[str, list] = field(default_factory=dict)
    formats: tuple[str, ...] = FORMATS

    def input(self, key: str, required: bool = True) -> Path | None:
        path = self.inputs.get(key)
        if path is None:
            if required:
                raise UsageError(f"manifest has no inputs.{key}")
            return None
        if not path.exists():
            raise UsageError(f"input file not found: {path}")
        return path

    def measurements_path(self) -> Path:
        if "measurements" in self.inputs:
            return self.input("measurements")
        path = self.out / "measurements.csv"
        if not path.exists():
            raise UsageError(f"input file not found: {path} (run simulate first or set inputs.measurements)")
        return path


def _params(cls, data: Mapping | None, what: str):
    try:
        return cls(**dict(data or {}))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid {what} settings: {exc}") from None


def parse_sweep(spec: str) -> tuple[str, list]:
    """``tau_time=60,90,120`` -> ``("tau_time", [60, 90, 120])``."""
    name, sep, values = spec.partition("=")
    name = name.strip().replace("-", "_")
    if not sep or name not in SWEEPABLE:
        raise UsageError(f"--sweep expects one of {', '.join(SWEEPABLE)} as name=v1,v2,...; got {spec!r}")
    cast = int if name == "tau_len" else float
    try:
        vals = [cast(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--sweep {name}: values must be numbers") from None
    if not vals:
        raise UsageError(f"--sweep {name}: empty value list")
    return name, vals


def load_manifest(path: str | Path | None, **overrides: Any) -> RunManifest:
    """Read a YAML manifest; relative paths resolve against its directory.

    Overrides (``seed``, ``out``, ``measurements``, ``tau_time``, ``tau_space``,
    ``tau_len``, ``sweep``, ``formats``) come from the command line; ``None``
    leaves the manifest value alone.
    """
    data: dict = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise UsageError(f"{path}: invalid YAML: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError(f"{path}: manifest must be a mapping")
        base = path.resolve().parent
    known = {"seed", "out", "inputs", "simulation", "preprocess", "contacts", "risk", "sweep"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise UsageError(f"unknown manifest sections: {', '.join(unknown)}")

    def resolve(p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base / p

    inputs = data.get("inputs") or {}
    bad = sorted(set(inputs) - set(INPUT_KEYS))
    if bad:
        raise UsageError(f"unknown inputs: {', '.join(bad)}")
    inputs = {k: resolve(v) for k, v in inputs.items() if v is not None}
    if overrides.get("measurements") is not None:
        inputs["measurements"] = Path(overrides["measurements"])

    seed = overrides.get("seed")
    if seed is None:
        seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise UsageError(f"seed must be an integer, got {seed!r}")

    out = overrides.get("out")
    out = Path(out) if out is not None else resolve(data.get("out", "out"))

    contacts = dict(data.get("contacts") or {})
    for key in SWEEPABLE:
        if overrides.get(key) is not None:
            contacts[key] = overrides[key]
    thresholds = data.get("risk") or {}
    try:
        risk = RiskThresholds.from_mapping(thresholds)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid risk settings: {exc}") from None

    sweep: dict[str, list] = {}
    for name, vals in (data.get("sweep") or {}).items():
        n, v = parse_sweep(f"{name}={','.join(str(x) for x in vals)}")
        sweep[n] = v
    for spec in overrides.get("sweep") or ():
        n, v = parse_sweep(spec)
        sweep[n] = v

    formats = tuple(overrides.get("formats") or FORMATS)
    for f in formats:
        if f not in FORMATS:
            raise UsageError(f"unknown format {f!r}")

    return RunManifest(
        base_dir=base,
        out=out,
        seed=seed,
        inputs=inputs,
        simulation=dict(data.get("simulation") or {}),
        preprocess=_params(PreprocessParams, data.get("preprocess"), "preprocess"),
        contacts=_params(ContactParams, contacts, "contacts"),
        risk=risk,
        sweep=sweep,
        formats=formats,
    )


def _ensure_out(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise UsageError(f"output directory {out} is not writable")


def cmd_simulate(manifest: RunManifest) -> dict[str, Path]:
    try:
        config = SimConfig.from_mapping(manifest.simulation, seed=manifest.seed)
    except ConfigError as exc:
        raise UsageError(f"simulation config: {exc}") from None
    roster_path = manifest.input("roster")
    mobility_path = manifest.input("mobility")
    try:
        roster = load_roster(roster_path)
    except DataError as exc:
        raise StageError("simulate", str(exc)) from None
    try:
        mobility = load_mobility(mobility_path)
    except (MobilityError, ValueError) as exc:
        raise StageError("simulate", f"{mobility_path}: {exc}") from None
    _ensure_out(manifest.out)
    try:
        result = run_simulation(config, roster, mobility)
    except MobilityError as exc:
        raise StageError("simulate", str(exc)) from None
    return write_simulation(result, manifest.out)


@dataclass
class Inputs:
    roster: Roster
    schedule: Schedule | None
    exemptions: frozenset
    windows: ActiveWindows
    absences: Absences
    measurements: list[RawMeasurement]
    discarded_beyond_range: int


def load_inputs(manifest: RunManifest) -> Inputs:
    paths = {
        "roster": manifest.input("roster"),
        "schedule": manifest.input("schedule", required=False),
        "exemptions": manifest.input("exemptions", required=False),
        "active_windows": manifest.input("active_windows"),
        "absences": manifest.input("absences", required=False),
        "measurements": manifest.measurements_path(),
    }
    try:
        roster = load_roster(paths["roster"])
        schedule = load_schedule(paths["schedule"], roster) if paths["schedule"] else None
        exemptions = load_exemptions(paths["exemptions"], roster) if paths["exemptions"] else frozenset()
        windows = load_active_windows(paths["active_windows"])
        absences = load_absences(paths["absences"], roster) if paths["absences"] else Absences({})
    except DataError as exc:
        raise StageError("load", str(exc)) from None
    max_range = float(manifest.simulation.get("max_range", 10.0))
    try:
        measurements, dropped = load_measurements(paths["measurements"], max_range=max_range)
    except DataError as exc:
        raise StageError("load", str(exc)) from None
    if not measurements:
        log.warning("measurement file %s holds no samples; reports will be empty", paths["measurements"])
    return Inputs(roster, schedule, exemptions, windows, absences, measurements, dropped)


def _write_reports(out: Path, formats: Sequence[str], reports: Mapping[str, Mapping]) -> None:
    if "json" in formats:
        names = {"table6": "table6_preprocess.json", "table4": "table4_contacts.json",
                 "fig4": "fig4_time_share.json", "fig5": "fig5_pair_views.json",
                 "table5": "table5_group_role.json", "fig7": "fig7_activity.json"}
        for key, fname in names.items():
            dump_json(out / fname, reports[key])
    if "csv" in formats:
        write_plot_csvs(reports, out)
    if "table" in formats:
        (out / "table4.txt").write_text(render_table4(reports["table4"]), encoding="utf-8")
        (out / "table5.txt").write_text(render_table5(reports["table5"]), encoding="utf-8")
        (out / "table6.txt").write_text(render_table6(reports["table6"]), encoding="utf-8")


def analyse(
    measurements: Sequence[RawMeasurement],
    inputs: Inputs,
    params: ContactParams,
    risk: RiskThresholds,
    out: Path,
    formats: Sequence[str],
    table6: Mapping,
) -> dict:
    """Contacts and risk stages on preprocessed samples; writes everything under ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    stats = ExtractionStats()
    try:
        contacts = extract_contacts(measurements, params, inputs.roster, inputs.schedule,
                                    inputs.exemptions, stats)
    except DataError as exc:
        raise StageError("contacts", str(exc)) from None
    write_contacts(out / "contacts.csv", contacts)
    reports = {"table6": table6, "table4": contacts_report(contacts, inputs.schedule, inputs.roster)}
    try:
        reports.update(risk_reports(contacts, inputs.roster, inputs.schedule, risk))
    except DataError as exc:
        raise StageError("risk", str(exc)) from None
    for name, data in reports.items():
        validate_report(name, data)
    _write_reports(out, formats, reports)
    return {"contacts": len(contacts), "stats": vars(stats)}


def _analyse_task(args):
    measurements, inputs, params, risk, out, formats, table6 = args
    return analyse(measurements, inputs, params, risk, out, formats, table6)


def worker_count(env: Mapping[str, str] | None = None) -> int:
    raw = (os.environ if env is None else env).get(THREADS_ENV)
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def cmd_pipeline(manifest: RunManifest) -> dict:
    """Preprocess, extract contacts and analyse; sweeps fan out after preprocessing."""
    workers = worker_count()
    inputs = load_inputs(manifest)
    _ensure_out(manifest.out)
    try:
        pre = preprocess(inputs.measurements, inputs.windows, inputs.absences, inputs.roster,
                         manifest.preprocess)
    except DataError as exc:
        raise StageError("preprocess", str(exc)) from None
    table6 = pre.report

    if not manifest.sweep:
        summary = analyse(pre.measurements, inputs, manifest.contacts, manifest.risk, manifest.out,
                          manifest.formats, table6)
        summary.update(raw=len(inputs.measurements), filtered=len(pre.measurements),
                       discarded_beyond_range=inputs.discarded_beyond_range)
        return summary

    points = []
    for name, vals in sorted(manifest.sweep.items()):
        for v in vals:
            points.append((name, v, replace(manifest.contacts, **{name: v})))
    tasks = [
        (pre.measurements, inputs, params, manifest.risk, manifest.out / "sweep" / f"{name}={v:g}",
         manifest.formats, table6)
        for name, v, params in points
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            results = list(pool.map(_analyse_task, tasks))
    else:
        results = [_analyse_task(t) for t in tasks]
    rows = [
        {"param": name, "value": v, "contacts": r["contacts"], "out": f"sweep/{name}={v:g}"}
        for (name, v, _), r in zip(points, results)
    ]
    summary = {"raw": len(inputs.measurements), "filtered": len(pre.measurements), "sweep": rows}
    dump_json(manifest.out / "sweep_summary.json", summary)
    return summary
