"""``jcm`` command line: run or verify one experiment config."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import experiments as ex
from .classical import ConvergenceError, IntegrationError, OffShellError
from .model import BorderError, TruncationError
from .quantum import EigensolverError

NUMERIC_ERRORS = (TruncationError, BorderError, OffShellError, IntegrationError, ConvergenceError, EigensolverError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jcm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*ex.KINDS, "verify"):
        p = sub.add_parser(name, help=f"{name} experiment" if name != "verify" else "check all invariants for a config")
        p.add_argument("--config", required=True, help="config file or preset name (" + ", ".join(ex.preset_names()) + ")")
        p.add_argument("--out", type=Path, default=None, help=f"output directory (default ${ex.OUT_ENV}/<name> or ./jcm-out/<name>)")
        p.add_argument("--threads", type=int, default=1, help="worker processes / BLAS threads")
        if name != "verify":
            p.add_argument("--verify", action="store_true", help="also run the invariant suite")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _verify(cfg: ex.ExperimentConfig, out: Path) -> int:
    report = ex.verify(cfg)
    sys.stdout.write(report.text())
    ex.write_report(report, out)
    return ex.EXIT_OK if report.passed else ex.EXIT_VERIFY


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return ex.EXIT_CONFIG
    try:
        cfg = ex.load_config(args.config)
        if args.command != "verify" and cfg.kind != args.command:
            raise ex.ConfigError("kind", f"config is a {cfg.kind!r} experiment, not {args.command!r}")
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return ex.EXIT_CONFIG
    out = args.out if args.out is not None else ex.default_out_dir(cfg)

    try:
        with threadpool_limits(limits=args.threads):
            if args.command == "verify":
                return _verify(cfg, out)
            result = ex.run(cfg, out, threads=args.threads)
            for name in result.outputs:
                print(out / name)
            if args.verify:
                return _verify(cfg, out)
    except NUMERIC_ERRORS as exc:
        print(f"numeric failure in {cfg.name} ({cfg.kind}): {exc}", file=sys.stderr)
        return ex.EXIT_NUMERIC
    return ex.EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
