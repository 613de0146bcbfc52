"""Command-line entry point: ``metaoc run|suite|replay|check``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..errors import InvalidConfiguration, MetaOCError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="metaoc", description="Meta-learned online control experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a full experiment from a config file")
    run.add_argument("config", type=Path)
    run.add_argument("-o", "--output", type=Path, help="output directory (default: the config's output_dir)")

    suite = sub.add_parser("suite", help="generate a task suite and store it as JSON")
    suite.add_argument("config", type=Path)
    suite.add_argument("--seed", type=int, default=0)
    suite.add_argument("--T", type=int, help="horizon (default: first entry of the config's T)")
    suite.add_argument("-o", "--output", type=Path, required=True)

    rep = sub.add_parser("replay", help="rerun a stored experiment directory and compare CSVs")
    rep.add_argument("stored", type=Path)
    rep.add_argument("-o", "--output", type=Path, help="where to write the rerun (default: STORED/replay)")

    chk = sub.add_parser("check", help="run the acceptance battery and print pass/fail per criterion")
    chk.add_argument("--only", help="comma-separated criterion numbers, e.g. 1,2,3")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except InvalidConfiguration as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MetaOCError, ArithmeticError, OSError) as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _dispatch(args):
    from .config import ExperimentConfig
    from .experiment import replay, run_experiment
    from .suite import generate_task_suite

    if args.command == "run":
        cfg = ExperimentConfig.load(args.config)
        out = args.output or Path(cfg.output_dir)
        report = run_experiment(cfg, out_dir=out)
        for T in cfg.T_values:
            for method in cfg.methods:
                final = report.final_meta_regret(method, T)
                if len(final):
                    print(f"T={T} {method:15s} meta-regret {final.mean():.6g} over {len(final)} seeds")
        print(f"wrote {out} in {report.elapsed:.1f}s")
        if report.partial:
            for f in report.failures:
                print(f"failed: {f}", file=sys.stderr)
            return EXIT_RUNTIME
        return EXIT_OK

    if args.command == "suite":
        cfg = ExperimentConfig.load(args.config)
        T = args.T if args.T is not None else cfg.T_values[0]
        if T < 2:
            raise InvalidConfiguration("T must be >= 2")
        _, art = generate_task_suite(cfg, args.seed, T)
        args.output.parent.mkdir(parents=True, exist_ok=True)
        art.save(args.output)
        print(f"suite {art.digest} ({art.N} tasks, T={T}) -> {args.output}")
        return EXIT_OK

    if args.command == "replay":
        out = args.output or args.stored / "replay"
        report, same = replay(args.stored, out)
        print(f"replayed into {out}: results.csv {'identical' if same else 'DIFFERS'}")
        return EXIT_OK if same and not report.partial else EXIT_RUNTIME

    from .checks import run_checks

    numbers = None
    if args.only:
        try:
            numbers = sorted({int(x) for x in args.only.split(",")})
        except ValueError:
            raise InvalidConfiguration(f"--only expects comma-separated integers, got {args.only!r}")
        if any(not 1 <= x <= 10 for x in numbers):
            raise InvalidConfiguration("criterion numbers run from 1 to 10")
    results = run_checks(numbers)
    for r in results:
        print(r.line(), flush=True)
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
