"""Command-line batch runner.

    realclocks run CONFIG.json [--seed N] [--out DIR] [--threads N]
    realclocks validate CONFIG.json

Exit status: 0 all checks pass, 1 a built-in check failed, 2 config could not
be parsed, 3 a numeric bound is violated.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import textio
from .config import ConfigError, derived_quantities, load_config
from .errors import ParameterError, RealClocksError
from .experiments import RUNNERS

log = logging.getLogger("realclocks")

EXIT_OK, EXIT_CHECK, EXIT_PARSE, EXIT_BOUNDS = 0, 1, 2, 3


def _load(args):
    try:
        return load_config(args.config, seed=getattr(args, "seed", None),
                           output_dir=getattr(args, "out", None)), EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None, EXIT_PARSE
    except ParameterError as exc:
        print(f"error: numeric bound violated: {exc}", file=sys.stderr)
        return None, EXIT_BOUNDS


def cmd_validate(args) -> int:
    cfg, status = _load(args)
    if cfg is None:
        return status
    for k, v in derived_quantities(cfg).items():
        print(f"{k} = {textio.fmt(v)}")
    for w in cfg.warnings:
        print(f"warning: {w}")
    print("config OK")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg, status = _load(args)
    if cfg is None:
        return status
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    summary = dict(derived_quantities(cfg))
    summary.update({f"numeric_{k}": v for k, v in sorted(cfg.numeric.items())})
    status = EXIT_OK
    try:
        results, checks = RUNNERS[cfg.experiment](cfg, threads=args.threads)
        summary.update(results)
        for name, ok in checks.items():
            summary[f"check_{name}"] = "pass" if ok else "fail"
        if not all(checks.values()):
            status = EXIT_CHECK
    except ParameterError as exc:
        summary["error"] = f"numeric bound violated: {exc}"
        status = EXIT_BOUNDS
    except RealClocksError as exc:
        summary["error"] = str(exc)
        status = EXIT_CHECK
    finally:
        summary["status"] = status
        textio.write_report(cfg.output_dir / "summary.txt", summary)
    print(f"wrote {cfg.output_dir / 'summary.txt'} (status {status})")
    if status == EXIT_CHECK:
        for k, v in summary.items():
            if v == "fail":
                print(f"failed: {k}", file=sys.stderr)
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="realclocks",
                                description="Quantum and classical evolution measured by real clocks.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiment described by a JSON config")
    r.add_argument("config", type=Path)
    r.add_argument("--seed", type=int, help="override numeric.seed")
    r.add_argument("--out", type=Path, help="override output_dir")
    r.add_argument("--threads", type=int, default=1,
                   help="worker threads for Monte Carlo paths; results do not depend on it")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a config and print derived quantities")
    v.add_argument("config", type=Path)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_PARSE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
