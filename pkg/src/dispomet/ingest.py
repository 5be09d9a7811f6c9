"""Parsing and validation of transaction logs and the instrument registry.

Input files are comma-separated UTF-8 text with a header row.  Transactions
carry six fields (investor_id, asset_id, side, quantity, price, timestamp);
the registry carries asset_id, underlying_id, leverage.  Parsed transactions
are assigned a ``seq`` index in input order and then stably sorted by
(timestamp, seq), so same-second events keep their input ordering.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from statistics import median
from typing import Iterable, TextIO

log = logging.getLogger(__name__)

TRANSACTION_COLUMNS = ("investor_id", "asset_id", "side", "quantity", "price", "timestamp")
REGISTRY_COLUMNS = ("asset_id", "underlying_id", "leverage")


class IngestError(Exception):
    """Base class for ingest failures."""


class SchemaError(IngestError):
    """A required column is missing from the header row."""


class MalformedRow(IngestError):
    """A data row could not be parsed into a valid record."""

    def __init__(self, line: int, reason: str) -> None:
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class DuplicateAsset(IngestError):
    def __init__(self, asset_id: str) -> None:
        self.asset_id = asset_id
        super().__init__(f"duplicate asset_id {asset_id!r} in registry")


class ZeroLeverage(IngestError):
    def __init__(self, asset_id: str) -> None:
        self.asset_id = asset_id
        super().__init__(f"asset_id {asset_id!r} has leverage 0")


class EmptyDataset(IngestError):
    """Summary statistics require at least one transaction."""


class Side(str, Enum):
    BUY = "B"
    SELL = "S"


@dataclass(frozen=True, slots=True)
class Transaction:
    """One trading order, the atomic input event."""

    investor_id: str
    asset_id: str
    side: Side
    quantity: int
    price: float
    timestamp: datetime
    seq: int = 0


@dataclass(frozen=True, slots=True)
class Instrument:
    """Asset metadata: underlying index and signed leverage factor.

    Positive leverage is a long-exposure instrument, negative is an
    inverse (short-exposure) instrument.
    """

    asset_id: str
    underlying_id: str
    leverage: float

    @property
    def long_exposure(self) -> bool:
        return self.leverage > 0


@dataclass(frozen=True, slots=True)
class DatasetSummary:
    n_investors: int
    n_assets: int
    n_transactions: int
    median_transactions_per_investor: float
    median_assets_per_investor: float
    median_account_horizon_years: float
    median_holding_days_per_asset: float

    def rows(self) -> list[tuple[str, str]]:
        """Label/value pairs for the descriptive summary table."""
        return [
            ("Number of investors", f"{self.n_investors}"),
            ("Number of assets", f"{self.n_assets}"),
            ("Number of transactions", f"{self.n_transactions}"),
            ("Median transactions per investor", f"{self.median_transactions_per_investor:g}"),
            ("Number of different assets traded", f"{self.median_assets_per_investor:g} per investor"),
            ("Client account time horizon (years)", f"{self.median_account_horizon_years:.2f}"),
            ("Holding time horizon per asset (days)", f"{self.median_holding_days_per_asset:.1f}"),
        ]


def _check_header(fieldnames: Iterable[str] | None, required: tuple[str, ...]) -> None:
    seen = set(fieldnames or ())
    missing = [c for c in required if c not in seen]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}")


def _parse_row(row: dict[str, str], line: int, seq: int) -> Transaction:
    side_txt = (row["side"] or "").strip()
    try:
        side = Side(side_txt)
    except ValueError:
        raise MalformedRow(line, f"side must be B or S, got {side_txt!r}") from None
    qty_txt = (row["quantity"] or "").strip()
    try:
        quantity = int(qty_txt)
    except ValueError:
        raise MalformedRow(line, f"quantity must be a whole number of units, got {qty_txt!r}") from None
    if quantity <= 0:
        raise MalformedRow(line, f"quantity must be positive, got {quantity}")
    try:
        price = float(row["price"])
    except ValueError:
        raise MalformedRow(line, f"unparseable price {row['price']!r}") from None
    if not price > 0:
        raise MalformedRow(line, f"price must be positive, got {price}")
    try:
        timestamp = datetime.fromisoformat(row["timestamp"].strip())
    except ValueError:
        raise MalformedRow(line, f"unparseable timestamp {row['timestamp']!r}") from None
    investor_id = (row["investor_id"] or "").strip()
    asset_id = (row["asset_id"] or "").strip()
    if not investor_id or not asset_id:
        raise MalformedRow(line, "investor_id and asset_id must be non-empty")
    return Transaction(investor_id, asset_id, side, quantity, price, timestamp, seq)


def parse_transactions(stream: TextIO, lenient: bool = False) -> list[Transaction]:
    """Parse a transaction log into a chronologically ordered list.

    Raises MalformedRow on the first bad row unless ``lenient`` is set, in
    which case bad rows are logged and skipped.  Raises SchemaError if a
    required column is missing.
    """
    txs, _ = parse_transactions_report(stream, lenient=lenient)
    return txs


def parse_transactions_report(
    stream: TextIO, lenient: bool = False
) -> tuple[list[Transaction], list[MalformedRow]]:
    """Like parse_transactions, also returning the rejected-row errors.

    In strict mode the first reject raises; in lenient mode every reject is
    recorded (and logged) so accepted + rejected equals the input row count.
    """
    reader = csv.DictReader(stream)
    _check_header(reader.fieldnames, TRANSACTION_COLUMNS)
    records: list[Transaction] = []
    rejects: list[MalformedRow] = []
    seq = 0
    for row in reader:
        line = reader.line_num
        try:
            if any(row.get(c) is None for c in TRANSACTION_COLUMNS):
                raise MalformedRow(line, "wrong number of fields")
            records.append(_parse_row(row, line, seq))
            seq += 1
        except MalformedRow as err:
            if not lenient:
                raise
            log.warning("skipping malformed row: %s", err)
            rejects.append(err)
    records.sort(key=lambda t: t.timestamp)  # stable: seq breaks ties
    return records, rejects


def serialize_transactions(transactions: Iterable[Transaction], stream: TextIO) -> None:
    """Write transactions in the same delimited format parse_transactions reads."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TRANSACTION_COLUMNS)
    for tx in transactions:
        writer.writerow(
            (tx.investor_id, tx.asset_id, tx.side.value, tx.quantity,
             repr(tx.price), tx.timestamp.isoformat(sep=" "))
        )


def parse_instruments(stream: TextIO) -> dict[str, Instrument]:
    """Parse the instrument registry into a mapping asset_id -> Instrument."""
    reader = csv.DictReader(stream)
    _check_header(reader.fieldnames, REGISTRY_COLUMNS)
    registry: dict[str, Instrument] = {}
    for row in reader:
        line = reader.line_num
        asset_id = (row["asset_id"] or "").strip()
        if not asset_id:
            raise MalformedRow(line, "asset_id must be non-empty")
        if asset_id in registry:
            raise DuplicateAsset(asset_id)
        try:
            leverage = float(row["leverage"])
        except (TypeError, ValueError):
            raise MalformedRow(line, f"unparseable leverage {row['leverage']!r}") from None
        if leverage == 0:
            raise ZeroLeverage(asset_id)
        registry[asset_id] = Instrument(asset_id, (row["underlying_id"] or "").strip(), leverage)
    return registry


def serialize_instruments(registry: dict[str, Instrument], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(REGISTRY_COLUMNS)
    for inst in registry.values():
        writer.writerow((inst.asset_id, inst.underlying_id, f"{inst.leverage:g}"))


_SECONDS_PER_YEAR = 365.25 * 86400.0
_SECONDS_PER_DAY = 86400.0


def summarize(transactions: list[Transaction]) -> DatasetSummary:
    """Descriptive summary: medians over per-investor and per-asset groups."""
    if not transactions:
        raise EmptyDataset("summarize requires at least one transaction")
    per_investor_count: dict[str, int] = {}
    per_investor_assets: dict[str, set[str]] = {}
    first_last: dict[str, tuple[datetime, datetime]] = {}
    asset_first_last: dict[tuple[str, str], tuple[datetime, datetime]] = {}
    assets: set[str] = set()
    for tx in transactions:
        inv = tx.investor_id
        per_investor_count[inv] = per_investor_count.get(inv, 0) + 1
        per_investor_assets.setdefault(inv, set()).add(tx.asset_id)
        assets.add(tx.asset_id)
        span = first_last.get(inv)
        if span is None:
            first_last[inv] = (tx.timestamp, tx.timestamp)
        else:
            first_last[inv] = (min(span[0], tx.timestamp), max(span[1], tx.timestamp))
        key = (inv, tx.asset_id)
        aspan = asset_first_last.get(key)
        if aspan is None:
            asset_first_last[key] = (tx.timestamp, tx.timestamp)
        else:
            asset_first_last[key] = (min(aspan[0], tx.timestamp), max(aspan[1], tx.timestamp))
    horizons = [
        (last - first).total_seconds() / _SECONDS_PER_YEAR for first, last in first_last.values()
    ]
    holding_days = [
        (last - first).total_seconds() / _SECONDS_PER_DAY
        for first, last in asset_first_last.values()
    ]
    return DatasetSummary(
        n_investors=len(per_investor_count),
        n_assets=len(assets),
        n_transactions=len(transactions),
        median_transactions_per_investor=float(median(per_investor_count.values())),
        median_assets_per_investor=float(median(len(s) for s in per_investor_assets.values())),
        median_account_horizon_years=float(median(horizons)),
        median_holding_days_per_asset=float(median(holding_days)),
    )
