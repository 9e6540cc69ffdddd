"""Command line entry point: ``bdnets <command> CONFIG``."""

from __future__ import annotations

import argparse
import logging
import sys

from bdnets.blocks import CapExceeded
from bdnets.pipeline import COMMANDS, load_config, run_pipeline
from bdnets.system import ConfigError

_HELP = {
    "build": "build the system and blocks, write blocks.csv",
    "order": "write the global order table order.csv",
    "verify": "run the selected invariant suites",
    "net": "extract the net and check its certificate",
    "export": "write every table without running suites",
    "run": "all exports followed by the selected suites",
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bdnets", description="Retractional bases on quantized nets.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log each suite as it finishes")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("config", help="path to a JSON run configuration")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        status, doc = run_pipeline(cfg, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CapExceeded as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return 3
    for suite in doc["suites"]:
        mark = "PASS" if suite["passed"] else "FAIL"
        print(f"[{mark}] {suite['name']}: bound {suite['bound']}, worst {suite['worst']}")
    out = cfg.output_dir()
    print(f"wrote {len(doc['exports'])} tables and summary.json to {out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
