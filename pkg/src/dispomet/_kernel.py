"""Integer-encoded streaming kernel behind metrics.run_engine.

Transactions are encoded once into flat arrays; the accrual loop then runs
over primitive types only so it can be JIT-compiled.  Iteration over an
investor's positions always follows asset_id order (the per-investor pair
lists are sorted at encode time), which keeps the floating-point summation
order of the context balance identical to the reference implementations.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ingest import Side, Transaction

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None


@dataclass(slots=True)
class EncodedStream:
    investors: list[str]
    assets: list[str]
    pair_index: dict[tuple[str, str], int]
    pair_investor: np.ndarray  # (n_pairs,) int64
    pair_asset: np.ndarray  # (n_pairs,) int64
    inv_pair_ptr: np.ndarray  # (n_investors + 1,) int64, CSR offsets
    inv_pair_list: np.ndarray  # (n_pairs,) int64, asset_id-sorted per investor
    ev_pair: np.ndarray  # (n,) int64
    ev_side: np.ndarray  # (n,) int8, +1 buy / -1 sell
    ev_qty: np.ndarray  # (n,) int64
    ev_price: np.ndarray  # (n,) float64


def encode(transactions: Sequence[Transaction]) -> EncodedStream:
    inv_idx: dict[str, int] = {}
    asset_idx: dict[str, int] = {}
    pair_idx: dict[tuple[int, int], int] = {}
    n = len(transactions)
    ev_pair = np.empty(n, np.int64)
    ev_side = np.empty(n, np.int8)
    ev_qty = np.empty(n, np.int64)
    ev_price = np.empty(n, np.float64)
    ev_inv = np.empty(n, np.int64)
    ev_asset = np.empty(n, np.int64)
    for i, tx in enumerate(transactions):
        ii = inv_idx.setdefault(tx.investor_id, len(inv_idx))
        ai = asset_idx.setdefault(tx.asset_id, len(asset_idx))
        pid = pair_idx.setdefault((ii, ai), len(pair_idx))
        ev_inv[i] = ii
        ev_asset[i] = ai
        ev_pair[i] = pid
        ev_side[i] = 1 if tx.side is Side.BUY else -1
        ev_qty[i] = tx.quantity
        ev_price[i] = tx.price
    investors = list(inv_idx)
    assets = list(asset_idx)
    n_pairs = len(pair_idx)
    pair_investor = np.empty(n_pairs, np.int64)
    pair_asset = np.empty(n_pairs, np.int64)
    per_inv: dict[int, list[int]] = {}
    for (ii, ai), pid in pair_idx.items():
        pair_investor[pid] = ii
        pair_asset[pid] = ai
        per_inv.setdefault(ii, []).append(pid)
    inv_pair_ptr = np.zeros(len(investors) + 1, np.int64)
    inv_pair_list = np.empty(n_pairs, np.int64)
    offset = 0
    for ii in range(len(investors)):
        pids = per_inv.get(ii, [])
        pids.sort(key=lambda pid: assets[pair_asset[pid]])
        inv_pair_ptr[ii] = offset
        for pid in pids:
            inv_pair_list[offset] = pid
            offset += 1
    inv_pair_ptr[len(investors)] = offset
    pair_index = {
        (investors[ii], assets[ai]): pid for (ii, ai), pid in pair_idx.items()
    }
    return EncodedStream(
        investors=investors,
        assets=assets,
        pair_index=pair_index,
        pair_investor=pair_investor,
        pair_asset=pair_asset,
        inv_pair_ptr=inv_pair_ptr,
        inv_pair_list=inv_pair_list,
        ev_pair=ev_pair,
        ev_side=ev_side,
        ev_qty=ev_qty,
        ev_price=ev_price,
    )


def _stream_loop(
    ev_pair,
    ev_side,
    ev_qty,
    ev_price,
    pair_investor,
    pair_asset,
    inv_pair_ptr,
    inv_pair_list,
    n_assets,
    sells_only,
    include_traded,
):
    # Tally layout: (pair, context, method*4 + component)
    # contexts: 0 positive, 1 negative, 2 neutral
    # components: 0 rg, 1 rl, 2 pg, 3 pl; methods: count, total, value
    n = ev_pair.shape[0]
    n_pairs = pair_investor.shape[0]
    pair_qty = np.zeros(n_pairs, np.int64)
    pair_ref = np.zeros(n_pairs, np.float64)
    last_price = np.zeros(n_assets, np.float64)
    tal = np.zeros((n_pairs, 3, 12), np.float64)
    for i in range(n):
        pid = ev_pair[i]
        asset = pair_asset[pid]
        inv = pair_investor[pid]
        qty = ev_qty[i]
        price = ev_price[i]
        delta = qty if ev_side[i] > 0 else -qty
        last_price[asset] = price

        # Ledger step: volume-weighted reference on increases, realization
        # leg on reductions, close-and-reopen on flips.
        old = pair_qty[pid]
        leg_closed = np.int64(0)
        leg_ret = 0.0
        if old == 0:
            pair_qty[pid] = delta
            pair_ref[pid] = price
        elif (old > 0) == (delta > 0):
            new = old + delta
            pair_ref[pid] = (abs(old) * pair_ref[pid] + qty * price) / abs(new)
            pair_qty[pid] = new
        else:
            leg_closed = min(abs(old), qty)
            ref = pair_ref[pid]
            if old > 0:
                leg_ret = (price - ref) / ref
            else:
                leg_ret = (ref - price) / ref
            new = old + delta
            pair_qty[pid] = new
            if new != 0 and (new > 0) != (old > 0):
                pair_ref[pid] = price

        if sells_only and ev_side[i] > 0:
            continue

        # Post-trade portfolio context from the other open positions.
        balance = 0.0
        seen = False
        lo = inv_pair_ptr[inv]
        hi = inv_pair_ptr[inv + 1]
        for k in range(lo, hi):
            pp = inv_pair_list[k]
            qn = pair_qty[pp]
            if qn == 0:
                continue
            if not include_traded and pair_asset[pp] == asset:
                continue
            mp = last_price[pair_asset[pp]]
            if mp <= 0.0:
                return tal, i
            balance += (mp - pair_ref[pp]) * qn
            seen = True
        if not seen or balance == 0.0:
            ctx = 2
        elif balance > 0.0:
            ctx = 0
        else:
            ctx = 1

        if leg_closed > 0 and leg_ret != 0.0:
            comp = 0 if leg_ret > 0.0 else 1
            tal[pid, ctx, comp] += 1.0
            tal[pid, ctx, 4 + comp] += leg_closed
            tal[pid, ctx, 8 + comp] += abs(leg_ret)

        for k in range(lo, hi):
            pp = inv_pair_list[k]
            qn = pair_qty[pp]
            if qn == 0:
                continue
            mp = last_price[pair_asset[pp]]
            if mp <= 0.0:
                return tal, i
            ref = pair_ref[pp]
            if qn > 0:
                ret = (mp - ref) / ref
            else:
                ret = (ref - mp) / ref
            if ret == 0.0:
                continue
            comp = 2 if ret > 0.0 else 3
            tal[pp, ctx, comp] += 1.0
            tal[pp, ctx, 4 + comp] += abs(qn)
            tal[pp, ctx, 8 + comp] += abs(ret)
    return tal, -1


if njit is not None:
    _stream_jit = njit(cache=True)(_stream_loop)
else:  # pragma: no cover
    _stream_jit = _stream_loop


def stream(enc: EncodedStream, sells_only: bool, include_traded: bool):
    """Run the accrual loop; returns (tally array, index of bad event or -1)."""
    return _stream_jit(
        enc.ev_pair,
        enc.ev_side,
        enc.ev_qty,
        enc.ev_price,
        enc.pair_investor,
        enc.pair_asset,
        enc.inv_pair_ptr,
        enc.inv_pair_list,
        len(enc.assets),
        sells_only,
        include_traded,
    )
