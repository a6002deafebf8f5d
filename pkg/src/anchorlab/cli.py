"""``anchorlab`` command line.

    anchorlab list
    anchorlab run <scenario|config.json> [--out PATH] [--format csv|json] [--seed N] [--nmax N]
    anchorlab check <trace.csv> --envelope <spec.json>

Exit status: 0 when every check passes, 1 on a property violation, 2 on a
configuration or input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from .errors import AnchorlabError, ConfigError
from .iteration import envelope_check, envelope_from_dict, read_trace_csv
from .operators import DEFAULT_SEED
from .scenarios import CATALOG, jsonable, run_config, run_scenario

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="anchorlab", description="Anchored implication and event-indexed contraction experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("list", help="print the built-in scenario catalog")

    run = sub.add_parser("run", help="run a built-in scenario or a JSON config file")
    run.add_argument("target", help="scenario name or path to a config file")
    run.add_argument("--out", help="output file (default: stdout)")
    run.add_argument("--format", choices=("csv", "json"), help="default: csv for traces, json otherwise")
    run.add_argument("--seed", type=int, default=DEFAULT_SEED)
    run.add_argument("--nmax", type=int, help="override the orbit length")

    chk = sub.add_parser("check", help="certify a trace CSV against an envelope")
    chk.add_argument("trace", help="CSV with header n,dist,envelope,event_flag")
    chk.add_argument("--envelope", required=True, help="JSON envelope spec")
    return p


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _load_json(path: str, what: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc.strerror}") from exc
    if not text.strip():
        raise ConfigError(f"{what} {path} is empty")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path} is not valid JSON: {exc}") from exc


def cmd_list(args) -> int:
    width = max(len(n) for n in CATALOG)
    for info in CATALOG.values():
        print(f"{info.name:<{width}}  {info.summary}")
        print(f"{'':<{width}}  expect: {info.headline}")
    return EXIT_OK


def cmd_run(args) -> int:
    if args.target in CATALOG:
        result = run_scenario(args.target, seed=args.seed, n_max=args.nmax)
    elif args.target.endswith(".json") or os.path.exists(args.target):
        result = run_config(_load_json(args.target, "config"), seed=args.seed, n_max=args.nmax)
    else:
        raise ConfigError(f"unknown scenario {args.target!r} (see 'anchorlab list')")
    fmt = args.format or ("csv" if result.trace is not None else "json")
    text = result.to_csv() if fmt == "csv" else json.dumps(result.report(), indent=2) + "\n"
    _emit(text, args.out)
    if not result.passed:
        print(f"{result.name}: failed checks: {', '.join(result.failures)}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        text = Path(args.trace).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read trace {args.trace}: {exc.strerror}") from exc
    try:
        _, dists, _ = read_trace_csv(text)
        spec = envelope_from_dict(_load_json(args.envelope, "envelope spec"))
        report = envelope_check(dists, spec)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    print(json.dumps(jsonable(report.as_dict()), indent=2))
    if not report.certified:
        print(f"envelope violated first at n = {report.first_violation}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors (2) and --help (0)
        return int(exc.code or 0)
    handler = {"list": cmd_list, "run": cmd_run, "check": cmd_check}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AnchorlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
