"""Command line entry point: ``datamarket run <config.json> [options]``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .experiment import ConfigError, OUTPUT_ROOT_ENV, resolve_output_dir, run_experiment, validate_config


def _seed_list(text: str) -> list:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}")
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="datamarket", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config",
                         epilog=f"Default output root: ${OUTPUT_ROOT_ENV} (else ./runs).")
    run.add_argument("config", help="path to the JSON config")
    run.add_argument("--out", help="output directory (overrides config and environment)")
    run.add_argument("--seeds", type=_seed_list, help="comma-separated seeds, e.g. 0,1,2")
    run.add_argument("--sampler", choices=["osmd", "uniform"], help="run only this sampler")
    run.add_argument("--regret", action="store_true", help="record gains of every provider and report regret")
    run.add_argument("--shapley", type=int, metavar="N",
                     help="accumulate per-round Shapley values (0 = exact, N = N permutations)")
    return parser


def _error(kind: str, message: str, code: int, **extra) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = validate_config(args.config)
        if args.seeds is not None:
            cfg = replace(cfg, seeds=args.seeds)
        if args.sampler is not None:
            cfg = replace(cfg, samplers=[args.sampler])
        if args.regret:
            cfg = replace(cfg, regret=True)
        if args.shapley is not None:
            if args.shapley < 0 or (args.shapley == 0 and cfg.n > 16):
                raise ConfigError("--shapley must be 0 (exact, n <= 16) or a positive count", "shapley")
            cfg = replace(cfg, shapley=args.shapley)
        out = resolve_output_dir(cfg, args.out, args.config)
        written = run_experiment(cfg, out)
    except ConfigError as e:
        return _error("ConfigError", str(e), 2, field=e.field, line=e.line)
    except FileNotFoundError as e:
        return _error("FileNotFoundError", str(e), 2)
    except Exception as e:  # surfaced as machine-readable JSON, not a traceback
        return _error(type(e).__name__, str(e), 1)
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
