"""Disposition-effect analytics for intraday transaction logs.

Pipeline: parse transaction logs (ingest), build market price series from
the pooled trades (prices), reconstruct per-investor portfolios event by
event (ledger), accrue realized/paper gains and losses under the Count,
Total, and Value methods across narrow, wide, and integrated framing
(metrics), and compare groups with Mann-Whitney tests (stats).  A seeded
synthetic-trader generator with a brute-force replay oracle (synth)
provides ground truth for validation.
"""

from .ingest import (
    DatasetSummary,
    Instrument,
    Side,
    Transaction,
    parse_instruments,
    parse_transactions,
    summarize,
)
from .ledger import Direction, PortfolioState, Position, RealizationLeg, unrealized_pnl
from .metrics import (
    Context,
    DeRecord,
    EngineOptions,
    Framing,
    Level,
    Method,
    Tally,
    TallyStore,
    aggregate,
    classify_context,
    compute_de,
    histogram,
    run_engine,
    signed_return,
)
from .prices import PriceSeries, SeriesCursor, build_series, price_at
from .stats import TestResult, compare_groups, format_cell, mann_whitney
from .synth import BehaviorProfile, generate_population, oracle_replay, random_stream

__version__ = "0.1.0"

__all__ = [
    "BehaviorProfile",
    "Context",
    "DatasetSummary",
    "DeRecord",
    "Direction",
    "EngineOptions",
    "Framing",
    "Instrument",
    "Level",
    "Method",
    "PortfolioState",
    "Position",
    "PriceSeries",
    "RealizationLeg",
    "SeriesCursor",
    "Side",
    "Tally",
    "TallyStore",
    "TestResult",
    "Transaction",
    "aggregate",
    "build_series",
    "classify_context",
    "compare_groups",
    "compute_de",
    "format_cell",
    "generate_population",
    "histogram",
    "mann_whitney",
    "oracle_replay",
    "parse_instruments",
    "parse_transactions",
    "price_at",
    "random_stream",
    "run_engine",
    "signed_return",
    "summarize",
    "unrealized_pnl",
]
