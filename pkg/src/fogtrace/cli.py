"""Command-line front end: ``fogtrace run | derive | graph``.

Exit codes: 0 success, 2 usage or validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .cloud import RegistrySnapshot
from .graph import DEFAULT_SUPER_SPREADER_K, build_graph, clusters_by, super_spreaders
from .ids import InvalidCodeError, ReferenceCode, derive_ruerc
from .scenario_file import parse_scenario
from .sim import ScenarioError, Simulation

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 2, 3


def _fail(code: int, message: str) -> int:
    print(f"fogtrace: {message}", file=sys.stderr)
    return code


def _write_csv_bundle(report, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    tables = {
        "suspects.csv": (
            ["suspect_id", "case", "suspect", "timestamp", "duration_s", "distance_m", "entered_at", "upload_id"],
            [[row[k] for k in ("suspect_id", "case", "suspect", "timestamp", "duration_s", "distance_m",
                               "entered_at", "upload_id")] for row in report.suspects],
        ),
        "alerts.csv": (
            ["node_id", "timestamp", "count"],
            [[a["node_id"], a["timestamp"], a["count"]] for a in report.arc_alerts],
        ),
        "notifications.csv": (
            ["channel", "recipient", "timestamp", "message_class"],
            [line.split(",") for line in report.notifications],
        ),
        "events.csv": (
            ["timestamp", "kind", "detail"],
            [(line.split(" ", 2) + [""])[:3] for line in report.event_log],
        ),
    }
    for name, (header, rows) in tables.items():
        with open(outdir / name, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)


def cmd_run(args) -> int:
    try:
        text = Path(args.scenario).read_text(encoding="utf-8")
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read {args.scenario}: {exc.strerror or exc}")
    try:
        scenario = parse_scenario(text)
        if args.seed is not None:
            scenario.seed = args.seed
        report = Simulation(scenario).run()
    except ScenarioError as exc:
        where = f"{args.scenario}:{exc.line}" if exc.line is not None else args.scenario
        return _fail(EXIT_USAGE, f"{where}: {exc.message}")

    try:
        if args.format == "json":
            if args.output:
                Path(args.output).write_text(report.to_json(), encoding="utf-8")
            else:
                sys.stdout.write(report.to_json())
        else:
            if not args.output:
                return _fail(EXIT_USAGE, "--format csv needs --output DIR")
            _write_csv_bundle(report, Path(args.output))
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write {args.output}: {exc.strerror or exc}")
    return EXIT_OK


def cmd_derive(args) -> int:
    try:
        uerc = ReferenceCode.from_hex(args.uerc.lower())
        if args.epoch < 0:
            raise ValueError("epoch must be non-negative")
        print(derive_ruerc(uerc, args.epoch).hex)
    except (InvalidCodeError, ValueError) as exc:
        return _fail(EXIT_USAGE, str(exc))
    return EXIT_OK


def format_graph_tables(snapshot: RegistrySnapshot, k: int) -> str:
    out = [f"super-spreaders (k={k})", "uerc                              degree"]
    for code, degree in super_spreaders(build_graph(snapshot), k):
        out.append(f"{code.hex}  {degree}")
    for key in ("postcode", "age_group"):
        out.append("")
        out.append(f"clusters by {key}")
        out.append(f"{key:<12}infected  suspected")
        for value, infected, suspected in clusters_by(snapshot, key):
            out.append(f"{value:<12}{infected:<10}{suspected}")
    return "\n".join(out) + "\n"


def cmd_graph(args) -> int:
    try:
        text = Path(args.input).read_text(encoding="utf-8")
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read {args.input}: {exc.strerror or exc}")
    try:
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ValueError("expected a JSON object")
        snapshot = RegistrySnapshot.from_dict(data.get("registry", data))
    except ValueError as exc:
        return _fail(EXIT_USAGE, f"{args.input}: {exc}")
    if args.k < 1:
        return _fail(EXIT_USAGE, "k must be >= 1")
    sys.stdout.write(format_graph_tables(snapshot, args.k))
    if args.edges:
        sys.stdout.write("\n" + build_graph(snapshot).to_edge_list())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fogtrace", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario file and write the report")
    run.add_argument("scenario")
    run.add_argument("-o", "--output", help="report file (json) or directory (csv); json defaults to stdout")
    run.add_argument("--format", choices=("json", "csv"), default="json")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.set_defaults(func=cmd_run)

    derive = sub.add_parser("derive", help="print the rotating code of a UERC for one epoch")
    derive.add_argument("uerc", help="32 hex characters")
    derive.add_argument("epoch", type=int)
    derive.set_defaults(func=cmd_derive)

    graph = sub.add_parser("graph", help="super-spreader and cluster tables from a report or registry dump")
    graph.add_argument("input")
    graph.add_argument("-k", type=int, default=DEFAULT_SUPER_SPREADER_K)
    graph.add_argument("--edges", action="store_true", help="also print the edge list")
    graph.set_defaults(func=cmd_graph)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
