"""Command-line front end for validation, pricing, and comparison runs.

Subcommands:

- ``validate``: print the market-setup validation report.
- ``price-caplets``: Monte Carlo caplet prices as CSV.
- ``price-swaptions``: Monte Carlo swaption prices as CSV.
- ``compare``: three-scheme common-random-numbers comparison CSV, with
  optional gnuplot-ready implied-vol difference surfaces.
- ``reproduce-paper``: the full bundled-setup experiment; runs every
  acceptance criterion, prints one pass/fail line per criterion, and
  writes the comparison artifacts.

All randomness flows from ``--seed``; outputs are byte-deterministic for a
fixed configuration and results do not depend on ``--threads``.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import sys
from pathlib import Path

from . import acceptance
from .market import MarketSetup, bundled_setup, load_setup, validate_setup
from .drift import DriftMethod
from .simulate import Scheme
from .pricing import (
    DEFAULT_MONEYNESS,
    DEFAULT_SWAPTION_PAIRS,
    CapletSpec,
    CouponConvention,
    SwaptionSpec,
    compare_schemes,
    forward_swap_rate,
    price_instruments_mc,
    write_iv_surface,
)

_PRICE_HEADER = [
    "instrument", "maturity_index", "end_index", "strike", "scheme",
    "price", "std_error", "n_paths", "n_invalid", "seed",
]


def _parse_moneyness(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"bad moneyness list {text!r}: {err}")
    if not values:
        raise argparse.ArgumentTypeError("moneyness list is empty")
    return values


def _add_common(parser: argparse.ArgumentParser, pricing: bool) -> None:
    parser.add_argument("--setup", metavar="FILE", default=None,
                        help="market setup file (default: bundled setup)")
    if not pricing:
        return
    parser.add_argument("--scheme", default="full",
                        choices=[s.value for s in Scheme],
                        help="simulation scheme (default: full)")
    parser.add_argument("--paths", type=int, default=100_000, metavar="N",
                        help="Monte Carlo paths (default: 100000)")
    parser.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED,
                        metavar="N", help="master seed; per-path substreams "
                        "derive from it")
    parser.add_argument("--substeps", type=int, default=4, metavar="N",
                        help="time steps per accrual period (default: 4)")
    parser.add_argument("--drift-method", default="cumulant",
                        choices=[m.value for m in DriftMethod],
                        help="drift evaluation route (default: cumulant)")
    parser.add_argument("--threads", type=int, default=1, metavar="N",
                        help="worker threads for path batches (default: 1)")
    parser.add_argument("--out", metavar="FILE", default=None,
                        help="output CSV path (default: stdout)")


def _load(args: argparse.Namespace) -> MarketSetup:
    if args.setup is None:
        return bundled_setup()
    return load_setup(args.setup)


@contextlib.contextmanager
def _open_out(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _write_price_rows(file, rows) -> None:
    writer = csv.writer(file, lineterminator="\n")
    writer.writerow(_PRICE_HEADER)
    for instrument, i, end, strike, est in rows:
        writer.writerow([
            instrument, i, "" if end is None else end, f"{strike:.10g}",
            est.scheme.value, f"{est.price:.12g}", f"{est.std_error:.6g}",
            est.n_paths, est.n_invalid, est.seed,
        ])


def _cmd_validate(args: argparse.Namespace) -> int:
    setup = _load(args)
    report = validate_setup(setup)
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def _caplet_strikes(setup: MarketSetup, args: argparse.Namespace):
    rates = args.rate if args.rate else list(range(1, setup.n_rates + 1))
    for i in rates:
        if not 1 <= i <= setup.n_rates:
            raise ValueError(f"rate index {i} outside 1..{setup.n_rates}")
        if args.strike is not None:
            yield i, args.strike
        else:
            forward = setup.initial_rate(i)
            for m in args.moneyness:
                yield i, m * forward


def _cmd_price_caplets(args: argparse.Namespace) -> int:
    setup = _load(args)
    scheme = Scheme.parse(args.scheme)
    specs = [CapletSpec(i, strike) for i, strike in _caplet_strikes(setup, args)]
    results = price_instruments_mc(
        setup, specs, [], [scheme], args.paths, args.seed, args.substeps,
        DriftMethod.parse(args.drift_method), threads=args.threads)
    estimates = results[scheme][0]
    rows = [("caplet", spec.maturity_index, None, spec.strike, est)
            for spec, est in zip(specs, estimates)]
    with _open_out(args.out) as fh:
        _write_price_rows(fh, rows)
    return 0


def _swaption_specs(setup: MarketSetup, args: argparse.Namespace):
    convention = CouponConvention(args.convention)
    if (args.expiry is None) != (args.end is None):
        raise ValueError("--expiry and --end must be given together")
    pairs = ([(args.expiry, args.end)] if args.expiry is not None
             else list(DEFAULT_SWAPTION_PAIRS))
    for i, end in pairs:
        if args.strike is not None:
            yield SwaptionSpec(i, end, args.strike, convention)
        else:
            par = forward_swap_rate(setup, i, end, convention)
            for m in args.moneyness:
                yield SwaptionSpec(i, end, m * par, convention)


def _cmd_price_swaptions(args: argparse.Namespace) -> int:
    setup = _load(args)
    scheme = Scheme.parse(args.scheme)
    specs = list(_swaption_specs(setup, args))
    results = price_instruments_mc(
        setup, [], specs, [scheme], args.paths, args.seed, args.substeps,
        DriftMethod.parse(args.drift_method), threads=args.threads)
    estimates = results[scheme][1]
    rows = [(f"swaption_{s.expiry_index}_{s.end_index}", s.expiry_index,
             s.end_index, s.strike, est)
            for s, est in zip(specs, estimates)]
    with _open_out(args.out) as fh:
        _write_price_rows(fh, rows)
    return 0


def _write_surfaces(table, prefix: str) -> list:
    written = []
    for scheme in (Scheme.FROZEN_DRIFT, Scheme.STRONG_TAYLOR):
        if scheme not in table.schemes:
            continue
        path = Path(f"{prefix}_{scheme.value}.dat")
        with open(path, "w", newline="") as fh:
            write_iv_surface(table, scheme, fh)
        written.append(path)
    return written


def _cmd_compare(args: argparse.Namespace) -> int:
    setup = _load(args)
    schemes = tuple(Scheme.parse(tok) for tok in args.schemes.split(","))
    table = compare_schemes(
        setup, args.paths, args.seed, substeps=args.substeps,
        moneyness=args.moneyness,
        schemes=schemes, drift_method=DriftMethod.parse(args.drift_method),
        threads=args.threads)
    with _open_out(args.out) as fh:
        table.write_csv(fh)
    if args.surface_out is not None:
        for path in _write_surfaces(table, args.surface_out):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def _cmd_reproduce(args: argparse.Namespace) -> int:
    setup = _load(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.paths_scale != 1.0:
        print(f"note: path counts scaled by {args.paths_scale:g}; this is a "
              "smoke run, tolerances are calibrated to the full counts")

    def emit(table) -> None:
        csv_path = out_dir / "comparison.csv"
        with open(csv_path, "w", newline="") as fh:
            table.write_csv(fh)
        print(f"wrote {csv_path}")
        for path in _write_surfaces(table, str(out_dir / "iv_surface")):
            print(f"wrote {path}")

    results = acceptance.run_all(
        setup, seed=args.seed, paths_scale=args.paths_scale,
        substeps=args.substeps, threads=args.threads, on_table=emit)
    for result in results:
        for line in result.lines():
            print(line)
    failed = [r for r in results if not r.passed]
    print("acceptance summary: %d/%d criteria passed"
          % (len(results) - len(failed), len(results)))
    return 0 if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levylibor",
        description="Monte Carlo pricing for a jump-driven forward-rate "
                    "model: three simulation schemes, caplets, swaptions, "
                    "and scheme-comparison experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a market setup file")
    _add_common(p, pricing=False)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("price-caplets", help="price caplets by Monte Carlo")
    _add_common(p, pricing=True)
    p.add_argument("--rate", type=int, action="append", metavar="I",
                   help="rate index (repeatable; default: all rates)")
    p.add_argument("--strike", type=float, default=None,
                   help="absolute strike (default: moneyness grid)")
    p.add_argument("--moneyness", type=_parse_moneyness,
                   default=DEFAULT_MONEYNESS, metavar="LIST",
                   help="comma-separated strike/forward ratios")
    p.set_defaults(func=_cmd_price_caplets)

    p = sub.add_parser("price-swaptions", help="price swaptions by Monte Carlo")
    _add_common(p, pricing=True)
    p.add_argument("--expiry", type=int, default=None, metavar="I",
                   help="option expiry rate index")
    p.add_argument("--end", type=int, default=None, metavar="M",
                   help="swap end index (exclusive with the default grid)")
    p.add_argument("--strike", type=float, default=None,
                   help="absolute strike (default: moneyness grid)")
    p.add_argument("--moneyness", type=_parse_moneyness,
                   default=DEFAULT_MONEYNESS, metavar="LIST",
                   help="comma-separated strike/par-rate ratios")
    p.add_argument("--convention", default="accrual",
                   choices=[c.value for c in CouponConvention],
                   help="fixed-leg coupon convention (default: accrual)")
    p.set_defaults(func=_cmd_price_swaptions)

    p = sub.add_parser("compare",
                       help="price the instrument grids under several "
                            "schemes on common random numbers")
    _add_common(p, pricing=True)
    p.add_argument("--schemes", default="full,frozen,taylor", metavar="LIST",
                   help="comma-separated schemes (must include full)")
    p.add_argument("--moneyness", type=_parse_moneyness,
                   default=DEFAULT_MONEYNESS, metavar="LIST",
                   help="comma-separated strike/forward ratios")
    p.add_argument("--surface-out", metavar="PREFIX", default=None,
                   help="also write implied-vol difference surfaces to "
                        "PREFIX_<scheme>.dat")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("reproduce-paper",
                       help="run the full bundled-setup experiment and the "
                            "acceptance-criteria summary")
    _add_common(p, pricing=False)
    p.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED,
                   metavar="N", help="master seed")
    p.add_argument("--substeps", type=int, default=4, metavar="N",
                   help="time steps per accrual period (default: 4)")
    p.add_argument("--threads", type=int, default=1, metavar="N",
                   help="worker threads for path batches (default: 1)")
    p.add_argument("--paths-scale", type=float, default=1.0, metavar="X",
                   help="rescale all path counts (smoke runs only)")
    p.add_argument("--out-dir", default=".", metavar="DIR",
                   help="directory for comparison artifacts (default: .)")
    p.set_defaults(func=_cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
