"""Command line entry point: ``run``, ``table`` and ``compare``."""
from __future__ import annotations

import argparse
import sys
import warnings
from dataclasses import replace

from .config import ConfigError, load_config
from .diagnostics import format_float
from .runner import EXIT_CODES, STATUS_OK, compare_runs, run, run_table

EXIT_CONFIG = 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kktldg", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="integrate one configuration")
    r.add_argument("--config", required=True)
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--output", help="output directory (overrides output_dir)")

    t = sub.add_parser("table", help="convergence study over doubling meshes")
    t.add_argument("--config", required=True)
    t.add_argument("--meshes", required=True, help="comma separated element counts, e.g. 40,80,160,320")
    t.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    t.add_argument("--output", help="output directory (overrides output_dir)")

    c = sub.add_parser("compare", help="per-column deltas between two run directories")
    c.add_argument("dir_a")
    c.add_argument("dir_b")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    warnings.simplefilter("ignore", RuntimeWarning)
    if args.command == "compare":
        try:
            report = compare_runs(args.dir_a, args.dir_b)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for k, v in report.items():
            print(f"{k} {format_float(v) if isinstance(v, float) else v}")
        return 0

    try:
        cfg = load_config(args.config, args.override)
        if args.output:
            cfg = replace(cfg, output_dir=args.output)
        if args.command == "table":
            meshes = [int(m) for m in args.meshes.split(",") if m.strip()]
        cfg.resolved()
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "run":
        res = run(cfg)
        for k, v in res.summary.items():
            print(f"{k} = {format_float(v) if isinstance(v, float) else v}")
        return res.exit_code

    try:
        table, results = run_table(cfg, meshes, cfg.output_dir)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(table.to_csv())
    worst = [r for r in results if r.status != STATUS_OK]
    return EXIT_CODES[worst[0].status] if worst else 0


if __name__ == "__main__":
    sys.exit(main())
