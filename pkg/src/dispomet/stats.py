"""Nonparametric two-sample comparisons of disposition-effect values.

The Mann-Whitney U test is computed exactly (full enumeration of the null
rank distribution) for small tie-free samples, and with the normal
approximation including tie and continuity corrections otherwise.  Reported
median differences follow the first-minus-second sign convention, with
significance stars *** p<0.01, ** p<0.05, * p<0.1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from statistics import median
from typing import Sequence

STAR_LEGEND = "* p<0.1, ** p<0.05, *** p<0.01"

#: Use exact enumeration when |x|*|y| is at most this and there are no ties.
EXACT_PRODUCT_LIMIT = 400


class EmptySample(Exception):
    pass


class EmptyGroup(Exception):
    def __init__(self, label: str) -> None:
        self.label = label
        super().__init__(f"group filter {label!r} selected no defined values")


@dataclass(frozen=True, slots=True)
class TestResult:
    median_first: float
    median_second: float
    median_diff: float  # first minus second
    u_statistic: float  # U of the first sample
    p_value: float
    stars: str  # "", "*", "**", or "***"
    mode: str  # "exact" or "normal"


def stars_for(p_value: float) -> str:
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.1:
        return "*"
    return ""


def _midranks(combined: Sequence[float]) -> list[float]:
    order = sorted(range(len(combined)), key=combined.__getitem__)
    ranks = [0.0] * len(combined)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and combined[order[j + 1]] == combined[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


@lru_cache(maxsize=None)
def _u_counts(n1: int, n2: int) -> tuple[int, ...]:
    """Null distribution of U as integer counts for u = 0 .. n1*n2.

    Recurrence over whether the largest rank belongs to the first sample.
    """
    if n1 == 0 or n2 == 0:
        return (1,)
    a = _u_counts(n1 - 1, n2)  # largest rank in first sample: adds n2 to U
    b = _u_counts(n1, n2 - 1)  # largest rank in second sample
    out = [0] * (n1 * n2 + 1)
    for u, c in enumerate(a):
        out[u + n2] += c
    for u, c in enumerate(b):
        out[u] += c
    return tuple(out)


def exact_cdf(u: float, n1: int, n2: int) -> Fraction:
    """P(U <= u) under the exact tie-free null."""
    counts = _u_counts(n1, n2)
    top = min(int(math.floor(u)), n1 * n2)
    if top < 0:
        return Fraction(0)
    return Fraction(sum(counts[: top + 1]), sum(counts))


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def mann_whitney(x: Sequence[float], y: Sequence[float], mode: str = "auto") -> TestResult:
    """Two-sided Mann-Whitney U test of location difference.

    mode "auto" uses exact enumeration when |x|*|y| <= EXACT_PRODUCT_LIMIT
    and the pooled sample is tie-free, the normal approximation (with tie
    and continuity corrections) otherwise.  "exact" and "normal" force a
    mode; forcing exact on tied samples raises ValueError.
    """
    if len(x) == 0 or len(y) == 0:
        raise EmptySample("both samples must be non-empty")
    if mode not in ("auto", "exact", "normal"):
        raise ValueError(f"unknown mode {mode!r}")
    n1, n2 = len(x), len(y)
    combined = list(x) + list(y)
    ranks = _midranks(combined)
    r1 = sum(ranks[:n1])
    u1 = r1 - n1 * (n1 + 1) / 2.0
    u2 = n1 * n2 - u1
    has_ties = len(set(combined)) < len(combined)
    if mode == "auto":
        mode = "exact" if (n1 * n2 <= EXACT_PRODUCT_LIMIT and not has_ties) else "normal"
    elif mode == "exact" and has_ties:
        raise ValueError("exact mode requires tie-free samples")

    if mode == "exact":
        p_one = exact_cdf(min(u1, u2), n1, n2)
        p = min(1.0, float(2 * p_one))
    else:
        n = n1 + n2
        # Tie correction on the rank variance.
        tie_sum = 0
        seen: dict[float, int] = {}
        for v in combined:
            seen[v] = seen.get(v, 0) + 1
        for t in seen.values():
            tie_sum += t**3 - t
        var = n1 * n2 / 12.0 * ((n + 1) - tie_sum / (n * (n - 1)))
        if var <= 0.0:
            p = 1.0
        else:
            mu = n1 * n2 / 2.0
            z = (max(u1, u2) - mu - 0.5) / math.sqrt(var)  # continuity correction
            p = min(1.0, 2.0 * _normal_sf(z))

    m1 = float(median(x))
    m2 = float(median(y))
    return TestResult(
        median_first=m1,
        median_second=m2,
        median_diff=m1 - m2,
        u_statistic=u1,
        p_value=p,
        stars=stars_for(p),
        mode=mode,
    )


def compare_groups(
    values_a: Sequence[float],
    values_b: Sequence[float],
    label_a: str,
    label_b: str,
    mode: str = "auto",
) -> tuple[str, TestResult]:
    """Row of a comparison table: label "A = B" plus the test result."""
    if len(values_a) == 0:
        raise EmptyGroup(label_a)
    if len(values_b) == 0:
        raise EmptyGroup(label_b)
    return f"{label_a} = {label_b}", mann_whitney(values_a, values_b, mode=mode)


def format_cell(result: TestResult, decimals: int = 3) -> str:
    """Median difference rounded to ``decimals`` places with stars appended."""
    text = f"{result.median_diff:.{decimals}f}"
    if float(text) == 0.0:
        text = f"{0.0:.{decimals}f}"  # avoid "-0.000"
    return text + result.stars


def render_table(
    sections: Sequence[tuple[str, Sequence[tuple[str, Sequence[TestResult]]]]],
    columns: Sequence[str],
    row_header: str = "",
    decimals: int = 3,
) -> str:
    """Aligned plain-text comparison table.

    ``sections`` is a list of (section title, rows); each row is a label and
    one TestResult per column.  A star-legend footnote closes the table.
    """
    cells: list[list[str]] = []
    for _, rows in sections:
        for label, results in rows:
            cells.append([label] + [format_cell(r, decimals) for r in results])
    header = [row_header] + list(columns)
    widths = [len(h) for h in header]
    for row in cells:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines: list[str] = []
    i = 0
    for title, rows in sections:
        if title:
            lines.append(title)
        lines.append(
            "  ".join(
                h.ljust(widths[0]) if k == 0 else h.rjust(widths[k])
                for k, h in enumerate(header)
            )
        )
        for label, _ in rows:
            row = cells[i]
            i += 1
            lines.append(
                "  ".join(
                    c.ljust(widths[0]) if k == 0 else c.rjust(widths[k])
                    for k, c in enumerate(row)
                )
            )
        lines.append("")
    lines.append(STAR_LEGEND)
    return "\n".join(lines)
