"""Command-line entry point.

    rheoflow run <config> [--out DIR] [--seed N]
    rheoflow check [--filter NAME] [--json]
    rheoflow resume <checkpoint> [--out DIR]

Exit codes: 0 ok, 2 config error, 3 solver abort, 4 check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, parse_config
from .runner import EXIT_CHECK, EXIT_CONFIG, run


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="rheoflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a simulation config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--out", type=Path, default=None)
    p_run.add_argument("--seed", type=int, default=None)

    p_check = sub.add_parser("check", help="run invariant suites and acceptance criteria")
    p_check.add_argument("--filter", default=None, help="substring filter on check ids")
    p_check.add_argument("--json", action="store_true", dest="as_json")

    p_resume = sub.add_parser("resume", help="continue a run from its checkpoint")
    p_resume.add_argument("checkpoint", type=Path)
    p_resume.add_argument("--out", type=Path, default=None)

    args = parser.parse_args(argv)

    if args.command == "run":
        try:
            config = parse_config(args.config)
        except ConfigError as exc:
            print(exc, file=sys.stderr)
            return EXIT_CONFIG
        return run(config, out_dir=args.out, seed=args.seed)

    if args.command == "resume":
        cfg_path = args.checkpoint.parent / "config.ini"
        if not cfg_path.exists():
            print(f"no config.ini next to {args.checkpoint}", file=sys.stderr)
            return EXIT_CONFIG
        try:
            config = parse_config(cfg_path)
        except ConfigError as exc:
            print(exc, file=sys.stderr)
            return EXIT_CONFIG
        config.values["scenario"]["checkpoint"] = str(args.checkpoint)
        out = args.out if args.out is not None else args.checkpoint.parent / "resumed"
        return run(config, out_dir=out)

    # check
    from .checks import run_checks

    results = run_checks(args.filter)
    if args.as_json:
        print(
            json.dumps(
                [
                    {
                        "id": r.id,
                        "measured": r.measured,
                        "tolerance": r.tolerance,
                        "pass": r.passed,
                        "note": r.note,
                    }
                    for r in results
                ],
                indent=2,
            )
        )
    else:
        for r in results:
            print(r.line())
        n_fail = sum(not r.passed for r in results)
        print(f"{len(results) - n_fail}/{len(results)} checks passed")
    return EXIT_CHECK if any(not r.passed for r in results) else 0


if __name__ == "__main__":
    raise SystemExit(main())
