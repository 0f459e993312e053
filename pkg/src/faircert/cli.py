"""Command-line entry point: parse inputs, run the analysis, write the report.

Exit codes: 0 = certified fair over the covered space, 1 = bias found,
2 = usage or parse error.

An auxiliary ``eval`` mode (``faircert eval --model M``) evaluates the exact
concrete oracle on points read from stdin, one whitespace/comma-separated
rational vector per line; it exists so external tools can consume the oracle
through the CLI surface alone.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from faircert import report as report_mod
from faircert.analysis import run_analysis
from faircert.domains import DOMAINS, SYMBOLIC
from faircert.model import (
    ParseError,
    eval_concrete,
    parse_model,
    parse_query,
    parse_spec,
)
from faircert.numeric import format_rational, parse_rational
from faircert.preanalysis import BudgetConfig, Partition


def _analyze_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="faircert",
        description="Certify causal fairness of a feed-forward ReLU classifier "
        "or describe and quantify its biased input regions.",
    )
    ap.add_argument("--model", required=True, help="network model file")
    ap.add_argument("--spec", required=True, help="input-layer specification file")
    group = ap.add_mutually_exclusive_group()
    group.add_argument("--query", help="initial-state restriction file")
    group.add_argument("--resume", help="previous report; re-seeds from its excluded set")
    ap.add_argument("--domain", choices=DOMAINS, default=SYMBOLIC)
    ap.add_argument("--lower", default="0", help="L: minimum continuous dimension width")
    ap.add_argument("--upper", type=int, default=None, help="U: max unknown ReLUs per pattern")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="-", help="report path ('-' = stdout)")
    ap.add_argument("--timeout", type=float, default=None, help="seconds before giving up")
    return ap


def _eval_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="faircert eval")
    ap.add_argument("--model", required=True)
    return ap


def _read(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _run_eval(argv: list[str]) -> int:
    args = _eval_parser().parse_args(argv)
    m = parse_model(_read(args.model))
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        tokens = line.replace(",", " ").split()
        x = [parse_rational(t) for t in tokens]
        print(eval_concrete(m, x))
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if argv and argv[0] == "eval":
            return _run_eval(argv[1:])
        args = _analyze_parser().parse_args(argv)
        m = parse_model(_read(args.model))
        spec = parse_spec(_read(args.spec))
        spec.validate_against(m)
        if args.resume:
            initial = report_mod.parse_resume(_read(args.resume), spec)
        elif args.query:
            query = parse_query(_read(args.query), spec)
            initial = [Partition.initial(spec, query)]
        else:
            initial = [Partition.initial(spec)]
        lower = parse_rational(args.lower)
        upper = args.upper if args.upper is not None else min(m.n_hidden, 10)
        upper = min(upper, m.n_hidden)
        if args.workers < 1:
            raise ValueError("--workers must be >= 1")
        budget = BudgetConfig(lower=lower, upper=upper)
    except (OSError, ParseError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    result = run_analysis(
        m,
        spec,
        initial,
        args.domain,
        budget,
        workers=args.workers,
        timeout=args.timeout,
    )
    config = {
        "domain": args.domain,
        "lower": format_rational(Fraction(lower)),
        "upper": upper,
    }
    rep = report_mod.build_report(spec, initial, result, config)
    payload = report_mod.emit_report(rep)
    if args.out == "-":
        sys.stdout.buffer.write(payload)
    else:
        with open(args.out, "wb") as fh:
            fh.write(payload)
    return 1 if rep.verdict == "biased" else 0


if __name__ == "__main__":
    raise SystemExit(main())
