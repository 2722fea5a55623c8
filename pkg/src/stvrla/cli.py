"""Command-line interface: tabulate, audit, batch, convert.

Every flag can also be set through an environment variable named
``STVRLA_<FLAG>`` (upper case, dashes as underscores), e.g.
``STVRLA_RISK_LIMIT=0.1``. Explicit flags win over the environment.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .ballots import ElectionError, format_decimal, load_election, serialize_election
from .planner import FULL, PARTIAL
from .report import Settings, audit_election, canonical_json, run_batch, write_batch
from .risk import AsnParams
from .tabulate import DEFAULT_PRECISION, tabulate

EXIT_FULL = 0
EXIT_USAGE = 2
EXIT_PARTIAL = 3
EXIT_NONE = 4

ENV_PREFIX = "STVRLA_"


def exit_code_for(kind: str) -> int:
    if kind == FULL:
        return EXIT_FULL
    if kind == PARTIAL:
        return EXIT_PARTIAL
    return EXIT_NONE


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {text}")
    return value


def _open_unit(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1: {text}")
    return value


def _error_rate(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0 <= value < 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1): {text}")
    return value


def _delta(text: str) -> Decimal:
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise argparse.ArgumentTypeError(f"not a decimal: {text!r}")
    if not value.is_finite() or not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1: {text}")
    return value


def _add(parser: argparse.ArgumentParser, flag: str, type_, default, help_: str):
    """Add an option whose default may come from the environment."""
    env = ENV_PREFIX + flag.lstrip("-").upper().replace("-", "_")
    parser.add_argument(flag, type=type_, default=None, help=f"{help_} [env {env}]")
    parser.set_defaults(**{"_env_" + flag.lstrip("-").replace("-", "_"): (env, type_, default)})


def _resolve_env(parser: argparse.ArgumentParser, args: argparse.Namespace):
    for key, spec in list(vars(args).items()):
        if not key.startswith("_env_"):
            continue
        dest = key[len("_env_"):]
        env, type_, default = spec
        if getattr(args, dest) is None:
            raw = os.environ.get(env)
            if raw is None:
                setattr(args, dest, default)
            else:
                try:
                    setattr(args, dest, type_(raw))
                except argparse.ArgumentTypeError as e:
                    parser.error(f"{env}: {e}")
        delattr(args, key)


def _common(parser: argparse.ArgumentParser):
    _add(parser, "--seats", _positive_int, None, "number of seats (overrides the file header)")
    _add(parser, "--precision", _nonneg_int, DEFAULT_PRECISION, "decimal places kept in transfer values")


def _audit_flags(parser: argparse.ArgumentParser):
    _common(parser)
    defaults = AsnParams()
    _add(parser, "--risk-limit", _open_unit, defaults.risk_limit, "risk limit alpha")
    _add(parser, "--error-rate", _error_rate, defaults.error_rate, "simulated 1-vote overstatement rate")
    _add(parser, "--reps", _positive_int, defaults.reps, "simulation repetitions per assertion")
    _add(parser, "--delta", _delta, Decimal("0.005"), "step size of the bound search")
    _add(parser, "--max-asn", _positive_int, defaults.max_sample, "largest sample size considered auditable")
    _add(parser, "--seed", _nonneg_int, defaults.seed, "simulation seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stvrla", description="Plan risk-limiting audits for STV elections.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tabulate", help="count an election and print the round log")
    p.add_argument("path")
    _common(p)
    p.add_argument("--json", action="store_true", help="emit one JSON record per round event")

    p = sub.add_parser("audit", help="plan an audit and write the plan report as JSON")
    p.add_argument("path")
    _audit_flags(p)
    _add(p, "--out", str, None, "write the report here instead of stdout")

    p = sub.add_parser("batch", help="plan audits for every election file in a directory")
    p.add_argument("directory")
    _audit_flags(p)
    _add(p, "--out", str, "stvrla-out", "output directory for plans and instances.csv")
    _add(p, "--summary", str, None, "summary CSV path (default OUT/summary.csv)")
    _add(p, "--jobs", _positive_int, 1, "worker processes")

    p = sub.add_parser("convert", help="convert a BLT file to the canonical format")
    p.add_argument("path")
    _add(p, "--out", str, None, "write here instead of stdout")
    return parser


def _settings(args) -> Settings:
    params = AsnParams(
        risk_limit=args.risk_limit,
        error_rate=args.error_rate,
        reps=args.reps,
        seed=args.seed,
        max_sample=args.max_asn,
    )
    return Settings(params=params, delta=args.delta, precision=args.precision, seats=args.seats)


def _load(path: str, seats):
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return load_election(path, seats)


def cmd_tabulate(args) -> int:
    election = _load(args.path, args.seats)
    outcome = tabulate(election, args.precision)
    if args.json:
        print(outcome.round_log(election))
        return 0
    print(f"ballots: {election.total_ballots}  seats: {election.seats}  quota: {election.quota}")
    for e in outcome.rounds:
        tallies = ", ".join(f"{election.name_of(c)}={format_decimal(t)}" for c, t in sorted(e.tallies_before.items()))
        tv = "" if e.transfer_value is None else f" (transfer value {format_decimal(e.transfer_value)})"
        print(f"round {e.round_number}: {tallies}; {e.kind} {election.name_of(e.candidate)}{tv}")
    print("winners: " + ", ".join(election.names(outcome.winners)))
    if outcome.tie_occurred:
        print("warning: a tie was broken by candidate order", file=sys.stderr)
    return 0


def cmd_audit(args) -> int:
    election = _load(args.path, args.seats)
    _, plan, report = audit_election(election, _settings(args))
    text = canonical_json(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return exit_code_for(plan.kind)


def cmd_batch(args) -> int:
    if not Path(args.directory).is_dir():
        raise FileNotFoundError(f"no such directory: {args.directory}")
    results = run_batch(args.directory, _settings(args), args.jobs)
    written = write_batch(results, args.out, args.summary)
    print("seats,winners_verified,instance_count,instance_pct,asn_avg,asn_min,asn_max")
    for r in written["summary"]:
        cells = [r.seats, r.winners_verified, r.instance_count, r.instance_pct, r.asn_avg, r.asn_min, r.asn_max]
        print(",".join("" if c is None else str(c) for c in cells))
    for f in written["failures"]:
        print(f"failed: {f['instance']}: {f['error']}", file=sys.stderr)
    print(f"{len(written['rows'])} planned, {len(written['failures'])} failed", file=sys.stderr)
    return 0


def cmd_convert(args) -> int:
    election = _load(args.path, None)
    text = serialize_election(election)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {"tabulate": cmd_tabulate, "audit": cmd_audit, "batch": cmd_batch, "convert": cmd_convert}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _resolve_env(parser, args)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as e:
        print(f"stvrla: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ElectionError, ValueError, json.JSONDecodeError) as e:
        print(f"stvrla: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
