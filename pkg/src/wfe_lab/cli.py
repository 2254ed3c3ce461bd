"""Command-line entry point: run one scenario or verify a suite.

Exit codes: 0 success, 1 a named check failed, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, parse_config
from .scenarios import run_scenario, verify_suite

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_CONFIG = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wfe-lab",
        description="run collective-dispersion scenarios and verification suites",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario config")
    run.add_argument("--config", required=True, help="path to a scenario .cfg file")
    run.add_argument("--out", default=None, help="output directory (overrides the config)")
    run.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override one config option (repeatable)",
    )

    verify = sub.add_parser("verify", help="run every config in a suite directory")
    verify.add_argument("--suite", required=True, help="directory of scenario .cfg files")
    verify.add_argument("--out", default="verify_out", help="aggregate output directory")
    verify.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override one option in every config (repeatable)",
    )
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        config = parse_config(args.config, args.overrides)
        out_dir = Path(args.out) if args.out else None
        result = run_scenario(config, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    for check in result.checks:
        print(check.line())
    print(f"artifacts: {result.out_dir}")
    if not result.passed:
        print(f"failing checks: {', '.join(result.failing())}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace) -> int:
    suite = Path(args.suite)
    if not suite.is_dir():
        print(f"config error: suite directory not found: {suite}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    try:
        report = verify_suite(suite, Path(args.out), args.overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    for name, entry in report["scenarios"].items():
        status = "PASS" if entry["passed"] else "FAIL"
        print(f"{status} {name} ({entry['wall_time_s']:.2f}s)")
    print(
        f"total: {len(report['scenarios'])} scenarios, "
        f"{report.get('total_wall_time_s', 0.0):.2f}s"
    )
    if not report["all_passed"]:
        failing = [
            f"{name}: {', '.join(entry.get('failing', []))}"
            for name, entry in report["scenarios"].items()
            if not entry["passed"]
        ]
        print("failing scenarios: " + "; ".join(failing), file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_verify(args)


if __name__ == "__main__":
    sys.exit(main())
