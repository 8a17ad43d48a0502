"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 runtime error, 4 plan
completed but deadline violations are present. Failures print a single
machine-parsable ``error: <kind>: <message>`` line on stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .charts import emit_chart
from .config import resolve_config
from .errors import ConfigError, ParseError, SimulationError
from .experiments import read_demand_file, run_cell_switching, run_interference, run_plan
from .results import read_sweep_csv
from .traffic import aggregate_demands, read_cdr_file, uniform_square_mapping, write_demand_csv

log = logging.getLogger("demandplan")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="demandplan",
        description="Deterministic demand-planning experiments for wireless networks.",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    parser.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run a bundled experiment")
    sim_sub = simulate.add_subparsers(dest="experiment", required=True)
    for name in ("cell-switching", "interference"):
        p = sim_sub.add_parser(name)
        p.add_argument("--config", required=True, help="config file or preset name")
        p.add_argument("--out", default="out", help="output directory")

    plan = sub.add_parser("plan", help="run the demand-planning pipeline")
    plan.add_argument("--config", required=True)
    plan.add_argument("--demands", required=True, help="demand CSV file")
    plan.add_argument("--out", default="out")

    ingest = sub.add_parser("ingest", help="ingest external traffic data")
    ingest_sub = ingest.add_subparsers(dest="source", required=True)
    milan = ingest_sub.add_parser("milan")
    milan.add_argument("--input", required=True, help="tab-separated CDR file")
    milan.add_argument("--out", required=True, help="demand CSV to write")
    milan.add_argument("--stations", type=int, default=1,
                       help="spread squares across this many stations")
    milan.add_argument("--scale", type=float, default=1e6, help="bits per activity unit")
    milan.add_argument("--slot-hours", type=int, default=1)

    chart = sub.add_parser("chart", help="render a sweep CSV as an SVG chart")
    chart.add_argument("--input", required=True)
    chart.add_argument("--out", required=True)
    chart.add_argument("--title", default=None)
    chart.add_argument("--ylabel", default="value")
    return parser


def _load_config(args):
    cfg = resolve_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    if args.experiment == "cell-switching":
        run_cell_switching(cfg, args.out, jobs=args.jobs)
    else:
        run_interference(cfg, args.out, jobs=args.jobs)
    log.info("results written to %s", args.out)
    return 0


def _cmd_plan(args) -> int:
    cfg = _load_config(args)
    demands = read_demand_file(args.demands)
    result = run_plan(cfg, demands, args.out)
    if result.violations:
        for v in result.violations:
            log.warning("deadline violation: %s (deadline slot %d)", v.demand_id, v.deadline_slot)
        print(
            f"deadline violations: {len(result.violations)} "
            f"(see {args.out}/violations.csv)",
            file=sys.stderr,
        )
        return 4
    log.info("plan written to %s", args.out)
    return 0


def _cmd_ingest(args) -> int:
    records = read_cdr_file(args.input)
    if args.stations < 1:
        raise ConfigError("need at least one station", "--stations")
    station_ids = [f"bs{i}" for i in range(args.stations)]
    mapping = uniform_square_mapping((r.square_id for r in records), station_ids)
    agg = aggregate_demands(records, mapping, args.scale, args.slot_hours)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        write_demand_csv(agg.series, fh)
    log.info("aggregated %d records into %s", len(records), args.out)
    return 0


def _cmd_chart(args) -> int:
    with open(args.input, encoding="utf-8", newline="") as fh:
        result = read_sweep_csv(fh)
    emit_chart(result, args.out, title=args.title, ylabel=args.ylabel)
    log.info("chart written to %s", args.out)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "plan":
            return _cmd_plan(args)
        if args.command == "ingest":
            return _cmd_ingest(args)
        return _cmd_chart(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except (ParseError, SimulationError, OSError, ValueError) as exc:
        print(f"error: runtime: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
