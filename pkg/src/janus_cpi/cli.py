"""Command-line entry point: ``janus-cpi <subcommand> [options]``.

Exit codes: 0 success, 1 data error, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .model import DataError
from .pipeline import FORMATS, RunManifest, StageError, UsageError, cmd_pipeline, cmd_simulate, load_manifest
from .validate import validate_inputs

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("janus_cpi")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML run manifest")
    p.add_argument("--seed", type=int, help="override the manifest seed")
    p.add_argument("--out", type=Path, help="output directory (default: manifest 'out')")


def _analysis(p: argparse.ArgumentParser) -> None:
    p.add_argument("--measurements", type=Path, help="measurement CSV (default: <out>/measurements.csv)")
    p.add_argument("--tau-time", type=float, help="temporal split threshold in seconds")
    p.add_argument("--tau-space", type=float, help="spatial split threshold in metres")
    p.add_argument("--tau-len", type=int, help="minimum measurements per contact")
    p.add_argument("--sweep", action="append", metavar="PARAM=V1,V2,...",
                   help="run the analysis once per value (repeatable)")
    p.add_argument("--format", action="append", choices=FORMATS, dest="formats",
                   help="report formats to write (repeatable; default all)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="janus-cpi", description="Close-proximity interaction analysis toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate the devices and write a measurement log")
    _common(p)

    p = sub.add_parser("pipeline", help="preprocess, extract contacts and write all reports")
    _common(p)
    _analysis(p)

    p = sub.add_parser("run", help="simulate, then run the pipeline on the simulated log")
    _common(p)
    _analysis(p)

    p = sub.add_parser("validate", help="check input files and report every issue found")
    p.add_argument("--config", type=Path, help="validate every input named in this manifest")
    for name in ("roster", "schedule", "exemptions", "measurements", "active-windows", "absences", "mobility"):
        p.add_argument(f"--{name}", type=Path)

    p = sub.add_parser("make-camp", help="write the synthetic three-camp data set and its manifest")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--camps", nargs="+", help="restrict to these camp ids")
    p.add_argument("--days", type=int, default=5)
    return parser


def _manifest(args) -> RunManifest:
    return load_manifest(
        args.config,
        seed=args.seed,
        out=args.out,
        measurements=getattr(args, "measurements", None),
        tau_time=getattr(args, "tau_time", None),
        tau_space=getattr(args, "tau_space", None),
        tau_len=getattr(args, "tau_len", None),
        sweep=getattr(args, "sweep", None),
        formats=getattr(args, "formats", None),
    )


def _validate(args) -> int:
    paths = {k: getattr(args, k) for k in
             ("roster", "schedule", "exemptions", "measurements", "active_windows", "absences", "mobility")}
    horizon = None
    if args.config is not None:
        manifest = load_manifest(args.config)
        for k in paths:
            if paths[k] is None:
                paths[k] = manifest.inputs.get(k)
        sim = manifest.simulation
        if "start" in sim and "end" in sim:
            horizon = (int(sim["start"]), int(sim["end"]))
    if all(v is None for v in paths.values()):
        raise UsageError("validate needs --config or at least one input file")
    issues = validate_inputs(**paths, horizon=horizon)
    for issue in issues:
        print(issue)
    print(f"{len(issues)} issue{'s' if len(issues) != 1 else ''}")
    return EXIT_DATA if issues else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.command == "validate":
            return _validate(args)
        if args.command == "make-camp":
            from .synth import generate_camp

            try:
                camp = generate_camp(args.seed, args.camps, args.days)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            print(camp.write(args.out, seed=args.seed))
            return EXIT_OK
        manifest = _manifest(args)
        if args.command in ("simulate", "run"):
            paths = cmd_simulate(manifest)
            log.info("simulation written to %s", paths["measurements"].parent)
        if args.command in ("pipeline", "run"):
            summary = cmd_pipeline(manifest)
            print(json.dumps({k: v for k, v in summary.items() if k != "stats"}, sort_keys=True))
        return EXIT_OK
    except UsageError as exc:
        print(f"janus-cpi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StageError, DataError) as exc:
        print(f"janus-cpi: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
