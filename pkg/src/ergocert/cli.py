"""Command-line front end: ``ergocert analyze|certify|diagnose|zoo``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__, zoo
from .errors import ErgocertError
from .pipeline import (
    EXIT_INPUT, analyze, certify, decay_csv, diagnose, dump_report, load_spec, parse_spec, tails_csv,
)

log = logging.getLogger("ergocert")


def _emit(report: dict, out: str | None) -> None:
    text = dump_report(report)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write(path: str | None, text: str) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)


def _cmd_analyze(args) -> int:
    spec = load_spec(args.spec)
    report, code = analyze(spec, timestamp=args.timestamp)
    if args.profile_csv and "ergodicity" in report:
        _write(args.profile_csv, decay_csv(spec, report))
    _emit(report, args.out)
    return code


def _run_certify(spec, args) -> int:
    report, code = certify(spec, seed=args.seed, samples=args.samples, timestamp=args.timestamp)
    _write(args.csv, tails_csv(report))
    _emit(report, args.out)
    return code


def _cmd_certify(args) -> int:
    return _run_certify(load_spec(args.spec), args)


def _cmd_diagnose(args) -> int:
    spec = load_spec(args.spec)
    report, code = diagnose(spec, lemma1_count=args.lemma1_batch, seed=args.seed or 0,
                            lemma1_only=args.lemma1_only, timestamp=args.timestamp)
    _emit(report, args.out)
    return code


def _cmd_zoo(args) -> int:
    if args.action == "list":
        for entry in zoo.listing():
            print(f"{entry['name']:<24} {entry['description']}")
        return 0
    if not args.name:
        raise SystemExit("zoo run needs an entry name")
    params = dict(zoo.parse_param(p) for p in args.param)
    data = zoo.build(args.name, **params)
    if args.dump_spec:
        print(json.dumps(data, indent=2, sort_keys=True))
        return 0
    return _run_certify(parse_spec(data), args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergocert",
        description="Concentration constants for geometrically ergodic finite Markov chains.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="write the JSON report here instead of stdout")
        p.add_argument("--timestamp", help="fixed generated_at value (reproducible reports)")

    p = sub.add_parser("analyze", help="check assumptions and compute the constants")
    p.add_argument("spec")
    p.add_argument("--profile-csv", help="write the TV decay profile (n, d_n, L r^n) here")
    common(p)
    p.set_defaults(func=_cmd_analyze)

    def certify_opts(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--csv", help="write tail rows (t, markov_bound, iid_bound, tail, ci_low, ci_high)")
        common(p)

    p = sub.add_parser("certify", help="compare the bound with exact or simulated tails")
    p.add_argument("spec")
    certify_opts(p)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("diagnose", help="run the proof-internal checks exhaustively")
    p.add_argument("spec")
    p.add_argument("--lemma1-batch", type=int, default=0, metavar="K")
    p.add_argument("--lemma1-only", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("zoo", help="built-in chains")
    p.add_argument("action", choices=["list", "run"])
    p.add_argument("name", nargs="?")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--dump-spec", action="store_true", help="print the generated spec and stop")
    certify_opts(p)
    p.set_defaults(func=_cmd_zoo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ErgocertError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
