"""Command-line surface: validate | compute | compare | synth | report.

Outputs are deterministic delimited text; identical inputs and flags give
byte-identical files regardless of --threads.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path
from typing import Sequence, TextIO

from . import ingest, metrics, stats, synth
from .ingest import IngestError, Instrument, MalformedRow, SchemaError, Transaction
from .metrics import Context, DeRecord, Framing, Level, Method

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SCHEMA = 2
EXIT_MALFORMED = 3
EXIT_EMPTY_GROUP = 4
EXIT_IO = 5

_FRAMING_LEVEL_DEFAULTS = {
    Framing.NARROW: Level.PER_ASSET,
    Framing.WIDE: Level.INVESTOR_POOLED,
    Framing.INTEGRATED: Level.PER_ASSET,
}


def _diag(message: str) -> None:
    print(f"dispomet: error: {message}", file=sys.stderr)


def _load_transactions(path: str, lenient: bool = False) -> tuple[list[Transaction], list[MalformedRow]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return ingest.parse_transactions_report(fh, lenient=lenient)


def _load_registry(path: str) -> dict[str, Instrument]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return ingest.parse_instruments(fh)


def _context_text(context: Context | None) -> str:
    return context.value if context is not None else "all"


def _write_records(records: Sequence[DeRecord], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("investor_id", "asset_id", "context", "method", "de", "defined"))
    for r in records:
        writer.writerow(
            (
                r.investor_id,
                r.asset_id,
                _context_text(r.context),
                r.method.value,
                "" if math.isnan(r.de) else repr(r.de),
                "true" if r.defined else "false",
            )
        )


def _write_histogram(bins: Sequence[tuple[float, int]], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("bin_edge", "count"))
    for edge, count in bins:
        writer.writerow((repr(edge), count))


def _engine_options(args: argparse.Namespace) -> metrics.EngineOptions:
    return metrics.EngineOptions(eval_scope=args.eval_scope, context_rule=args.context_rule)


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        transactions, rejects = _load_transactions(args.transactions, lenient=args.lenient)
    except SchemaError as err:
        _diag(f"SchemaError: {err}")
        return EXIT_SCHEMA
    except MalformedRow as err:
        _diag(f"MalformedRow: {err}")
        return EXIT_MALFORMED
    if args.registry:
        try:
            _load_registry(args.registry)
        except SchemaError as err:
            _diag(f"SchemaError: {err}")
            return EXIT_SCHEMA
        except IngestError as err:
            _diag(f"{type(err).__name__}: {err}")
            return EXIT_MALFORMED
    print(f"{len(transactions)} rows accepted, {len(rejects)} rejected")
    if rejects:
        print(f"{len(rejects)} row{'s' if len(rejects) != 1 else ''} skipped")
        for err in rejects:
            print(f"  line {err.line}: {err.reason}")
    if transactions:
        summary = ingest.summarize(transactions)
        width = max(len(label) for label, _ in summary.rows())
        for label, value in summary.rows():
            print(f"{label.ljust(width)}  {value}")
    return EXIT_OK


def _compute_records(
    transactions: Sequence[Transaction], args: argparse.Namespace
) -> dict[Framing, list[DeRecord]]:
    store = metrics.run_engine(transactions, _engine_options(args), threads=args.threads)
    tallies = store.to_dict()
    methods = [Method(m) for m in args.method.split(",")]
    out: dict[Framing, list[DeRecord]] = {}
    framings = list(Framing) if args.framing == "all" else [Framing(args.framing)]
    for framing in framings:
        level = Level(args.level) if args.level else _FRAMING_LEVEL_DEFAULTS[framing]
        out[framing] = metrics.aggregate(
            tallies, level, framing, methods=methods, zero_policy=args.zero_denominator
        )
    return out


def cmd_compute(args: argparse.Namespace) -> int:
    try:
        transactions, _ = _load_transactions(args.transactions, lenient=args.lenient)
    except SchemaError as err:
        _diag(f"SchemaError: {err}")
        return EXIT_SCHEMA
    except MalformedRow as err:
        _diag(f"MalformedRow: {err}")
        return EXIT_MALFORMED
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    per_framing = _compute_records(transactions, args)
    for framing, records in per_framing.items():
        for method_name in args.method.split(","):
            method = Method(method_name)
            selected = [r for r in records if r.method is method]
            with open(out_dir / f"records_{framing.value}_{method.value}.csv", "w", encoding="utf-8") as fh:
                _write_records(selected, fh)
            bins = metrics.histogram((r.de for r in selected if r.defined), args.bins)
            with open(out_dir / f"hist_{framing.value}_{method.value}.csv", "w", encoding="utf-8") as fh:
                _write_histogram(bins, fh)
    print(f"wrote {sum(len(r) for r in per_framing.values())} records to {out_dir}")
    return EXIT_OK


def _comparison_samples(
    records: Sequence[DeRecord],
    registry: dict[str, Instrument],
    method: Method,
    leverage: float,
    context: Context | None,
) -> list[float]:
    out = []
    for r in records:
        if not r.defined or r.method is not method or r.context is not context:
            continue
        inst = registry.get(r.asset_id)
        if inst is None or inst.leverage != leverage:
            continue
        out.append(r.de)
    return out


def _lev_label(leverage: float) -> str:
    return f"{leverage:g}x"


def _volatility_sections(records, registry, leverages, methods):
    pairs = [
        (leverages[i], leverages[j])
        for i in range(len(leverages))
        for j in range(i + 1, len(leverages))
    ]
    sections = []
    for title, context in (("Negative Portfolio", Context.NEGATIVE), ("Positive Portfolio", Context.POSITIVE)):
        rows = []
        for lev_a, lev_b in pairs:
            results = []
            for method in methods:
                sample_a = _comparison_samples(records, registry, method, lev_a, context)
                sample_b = _comparison_samples(records, registry, method, lev_b, context)
                if not sample_a:
                    raise stats.EmptyGroup(f"{_lev_label(lev_a)} in {title}")
                if not sample_b:
                    raise stats.EmptyGroup(f"{_lev_label(lev_b)} in {title}")
                results.append(stats.mann_whitney(sample_a, sample_b))
            rows.append((f"{_lev_label(lev_a)} = {_lev_label(lev_b)}", results))
        sections.append((title, rows))
    return sections


def _long_vs_inverse_sections(records, registry, leverages, methods):
    magnitudes = sorted({abs(l) for l in leverages if -l in leverages})
    rows = []
    for mag in magnitudes:
        results = []
        for method in methods:
            inverse = _comparison_samples(records, registry, method, -mag, None)
            long_side = _comparison_samples(records, registry, method, mag, None)
            if not inverse:
                raise stats.EmptyGroup(_lev_label(-mag))
            if not long_side:
                raise stats.EmptyGroup(_lev_label(mag))
            results.append(stats.mann_whitney(inverse, long_side))
        rows.append((f"{_lev_label(-mag)} = {_lev_label(mag)}", results))
    return [("", rows)]


def _context_split_sections(records, registry, leverages, methods):
    shorts = sorted([l for l in leverages if l < 0], key=abs)
    longs = sorted([l for l in leverages if l > 0])
    sections = []
    for title, group in (
        ("Short ETFs tested in Negative vs Positive Portfolio", shorts),
        ("Long ETFs tested in Negative vs Positive Portfolio", longs),
    ):
        rows = []
        for lev in group:
            results = []
            for method in methods:
                negative = _comparison_samples(records, registry, method, lev, Context.NEGATIVE)
                positive = _comparison_samples(records, registry, method, lev, Context.POSITIVE)
                if not negative:
                    raise stats.EmptyGroup(f"{_lev_label(lev)} negative context")
                if not positive:
                    raise stats.EmptyGroup(f"{_lev_label(lev)} positive context")
                results.append(stats.mann_whitney(negative, positive))
            rows.append((f"{_lev_label(lev)} = {_lev_label(lev)}", results))
        if rows:
            sections.append((title, rows))
    return sections


_COMPARE_SPECS = {
    "volatility-long": (Framing.INTEGRATED, "Long ETF"),
    "volatility-short": (Framing.INTEGRATED, "Short ETF"),
    "long-vs-inverse": (Framing.NARROW, "ETF"),
    "context-split": (Framing.INTEGRATED, ""),
}


def cmd_compare(args: argparse.Namespace) -> int:
    try:
        transactions, _ = _load_transactions(args.transactions, lenient=args.lenient)
        registry = _load_registry(args.registry)
    except SchemaError as err:
        _diag(f"SchemaError: {err}")
        return EXIT_SCHEMA
    except IngestError as err:
        _diag(f"{type(err).__name__}: {err}")
        return EXIT_MALFORMED
    framing, row_header = _COMPARE_SPECS[args.spec]
    store = metrics.run_engine(transactions, _engine_options(args), threads=args.threads)
    records = metrics.aggregate(
        store.to_dict(), Level.PER_ASSET, framing, zero_policy=args.zero_denominator
    )
    methods = [Method(m) for m in args.method.split(",")]
    leverages = sorted({inst.leverage for inst in registry.values()})
    try:
        if args.spec == "volatility-long":
            sections = _volatility_sections(records, registry, [l for l in leverages if l > 0], methods)
        elif args.spec == "volatility-short":
            sections = _volatility_sections(
                records, registry, sorted([l for l in leverages if l < 0], key=abs), methods
            )
        elif args.spec == "long-vs-inverse":
            sections = _long_vs_inverse_sections(records, registry, leverages, methods)
        else:
            sections = _context_split_sections(records, registry, leverages, methods)
    except stats.EmptyGroup as err:
        _diag(f"EmptyGroup: {err}")
        return EXIT_EMPTY_GROUP
    table = stats.render_table(
        sections, [m.value.capitalize() for m in methods], row_header=row_header, decimals=args.decimals
    )
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"compare_{args.spec}.txt").write_text(table + "\n", encoding="utf-8")
        print(f"wrote comparison table to {out_dir / f'compare_{args.spec}.txt'}")
    else:
        print(table)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    profile = synth.BehaviorProfile(
        p_realize_gain=args.pg,
        p_realize_loss=args.pl,
        n_assets=args.assets,
        leverages=tuple(float(l) for l in args.leverages.split(",")),
        horizon_events=args.horizon,
        seed=args.seed,
    )
    try:
        transactions, registry = synth.generate_population(args.investors, profile)
    except synth.InvalidProfile as err:
        _diag(f"InvalidProfile: {err}")
        return EXIT_ERROR
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "transactions.csv", "w", encoding="utf-8") as fh:
        ingest.serialize_transactions(transactions, fh)
    with open(out_dir / "instruments.csv", "w", encoding="utf-8") as fh:
        ingest.serialize_instruments(registry, fh)
    print(f"wrote {len(transactions)} transactions for {args.investors} investors to {out_dir}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    try:
        transactions, _ = _load_transactions(args.transactions, lenient=args.lenient)
    except SchemaError as err:
        _diag(f"SchemaError: {err}")
        return EXIT_SCHEMA
    except MalformedRow as err:
        _diag(f"MalformedRow: {err}")
        return EXIT_MALFORMED
    if not transactions:
        _diag("EmptyDataset: no transactions")
        return EXIT_ERROR
    summary = ingest.summarize(transactions)
    width = max(len(label) for label, _ in summary.rows())
    print("Descriptive Summary of Investors")
    for label, value in summary.rows():
        print(f"{label.ljust(width)}  {value}")
    print()
    store = metrics.run_engine(transactions, _engine_options(args), threads=args.threads)
    records = metrics.aggregate(
        store.to_dict(),
        Level.INVESTOR_POOLED,
        Framing.NARROW,
        methods=[Method.COUNT],
        zero_policy=args.zero_denominator,
    )
    bins = metrics.histogram((r.de for r in records if r.defined), args.bins)
    print("Histogram of the investor-level disposition effect (method Count)")
    peak = max((c for _, c in bins), default=0)
    for edge, count in bins:
        bar = "#" * (0 if peak == 0 else round(40 * count / peak))
        print(f"[{edge:+.2f}, {edge + args.bins:+.2f})  {str(count).rjust(6)}  {bar}")
    return EXIT_OK


def _add_engine_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--eval-scope", choices=("every-event", "sells-only"), default="every-event")
    parser.add_argument(
        "--context-rule",
        choices=("exclude-traded-asset", "include-traded-asset"),
        default="exclude-traded-asset",
    )
    parser.add_argument("--zero-denominator", choices=("exclude", "zero"), default="exclude")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--lenient", action="store_true", help="skip malformed rows instead of aborting")
    parser.add_argument("--method", default="count,total,value", help="comma-separated subset of count,total,value")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dispomet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse inputs and print a descriptive summary")
    p.add_argument("--transactions", required=True)
    p.add_argument("--registry")
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("compute", help="write disposition-effect records and histograms")
    p.add_argument("--transactions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--framing", choices=("narrow", "wide", "integrated", "all"), default="integrated")
    p.add_argument("--level", choices=tuple(l.value for l in Level), default=None)
    p.add_argument("--bins", type=float, default=0.1, help="histogram bin width")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("compare", help="emit Mann-Whitney comparison tables")
    p.add_argument("--transactions", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--spec", choices=tuple(_COMPARE_SPECS), required=True)
    p.add_argument("--out")
    p.add_argument("--decimals", type=int, default=3)
    _add_engine_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="generate a synthetic transaction dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--investors", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pg", type=float, default=0.5, help="probability of realizing a winner per evaluation")
    p.add_argument("--pl", type=float, default=0.5, help="probability of realizing a loser per evaluation")
    p.add_argument("--assets", type=int, default=8)
    p.add_argument("--horizon", type=int, default=60)
    p.add_argument("--leverages", default="1,2,3,7,-1,-2,-3,-7")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="print summary and histogram for a transaction log")
    p.add_argument("--transactions", required=True)
    p.add_argument("--bins", type=float, default=0.1)
    _add_engine_flags(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as err:
        _diag(f"IOError: {err}")
        return EXIT_IO
    except metrics.InvalidBinWidth as err:
        _diag(f"InvalidBinWidth: {err}")
        return EXIT_ERROR
    except IngestError as err:
        _diag(f"{type(err).__name__}: {err}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
