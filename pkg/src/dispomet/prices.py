"""Per-asset market price series built from all clients' transactions.

Every transaction contributes one observation to its asset's series, so the
series precisely aligns with the trading times in the data.  Point-in-time
lookups use last-observation-carried-forward: the latest observation with
key (timestamp, seq) <= the query key.  A transaction's own price is the
most recent observation at its own event.
"""
from __future__ import annotations

import csv
from bisect import bisect_right
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, TextIO

from .ingest import Transaction


@dataclass(slots=True)
class PriceSeries:
    """Immutable-after-build observation list for one asset."""

    asset_id: str
    keys: list[tuple[datetime, int]] = field(default_factory=list)
    prices: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.prices)


def build_series(transactions: Iterable[Transaction]) -> dict[str, PriceSeries]:
    """Pool every client's trades into one market series per asset."""
    out: dict[str, PriceSeries] = {}
    for tx in transactions:
        series = out.get(tx.asset_id)
        if series is None:
            series = out[tx.asset_id] = PriceSeries(tx.asset_id)
        series.keys.append((tx.timestamp, tx.seq))
        series.prices.append(tx.price)
    return out


def price_at(series: PriceSeries, t: datetime, seq: int) -> float | None:
    """Price of the latest observation with key <= (t, seq), or None."""
    idx = bisect_right(series.keys, (t, seq))
    if idx == 0:
        return None
    return series.prices[idx - 1]


class SeriesCursor:
    """Forward-only lookup over one series, amortized O(1) for chronological queries."""

    def __init__(self, series: PriceSeries) -> None:
        self._series = series
        self._idx = 0  # number of observations at or before the last query

    def price_at(self, t: datetime, seq: int) -> float | None:
        keys = self._series.keys
        i = self._idx
        n = len(keys)
        key = (t, seq)
        while i < n and keys[i] <= key:
            i += 1
        self._idx = i
        if i == 0:
            return None
        return self._series.prices[i - 1]


def export_series(series: PriceSeries, stream: TextIO) -> None:
    """Dump one series as delimited text for inspection."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("timestamp", "seq", "price"))
    for (ts, seq), price in zip(series.keys, series.prices):
        writer.writerow((ts.isoformat(sep=" "), seq, repr(price)))
