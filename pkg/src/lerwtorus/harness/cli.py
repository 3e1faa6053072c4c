"""Command line: ``lerwtorus run|report|oracle-check``.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import tempfile
from pathlib import Path

from lerwtorus.harness.config import ConfigError, ExperimentConfig, load_config
from lerwtorus.harness.report import render, report
from lerwtorus.harness.runner import RecordError, run

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lerwtorus", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run or resume an experiment config")
    r.add_argument("config")
    r.add_argument("--threads", type=int, help="override the config's thread count")
    r.add_argument("--out", help="override the config's output path")
    rep = sub.add_parser("report", help="print a record's summary")
    rep.add_argument("record")
    rep.add_argument("--svg", nargs="?", const="", metavar="DIR",
                     help="write one SVG per curve and fit (default: next to the record)")
    o = sub.add_parser("oracle-check", help="three-way LERW agreement on C5 and K4")
    o.add_argument("--samples", type=int, default=10**6)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", help="record path (default: a temporary file)")
    return p


def _failed(summary: dict | None) -> list[str]:
    return [k for k, v in ((summary or {}).get("checks") or {}).items() if v is False]


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            overrides = {"out": args.out} if args.out else {}
            if args.threads is not None:
                overrides["threads"] = args.threads
            cfg = load_config(args.config, **overrides)
            record = run(cfg)
            print(render(record))
        elif args.command == "report":
            svg = None
            if args.svg is not None:
                svg = args.svg or str(Path(args.record).parent)
            text, files = report(args.record, svg)
            print(text)
            for f in files:
                print(f"wrote {f}")
        else:
            with tempfile.TemporaryDirectory() as tmp:
                out = args.out or str(Path(tmp) / "oracle-check.jsonl")
                cfg = ExperimentConfig("oracle-check", replicas=args.samples, seed=args.seed, out=out,
                                       bands={"tv": 0.01}).validate()
                record = run(cfg)
                print(render(record))
            bad = _failed(record.summary)
            if bad:
                print(f"failed checks: {', '.join(bad)}", file=sys.stderr)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, RecordError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
