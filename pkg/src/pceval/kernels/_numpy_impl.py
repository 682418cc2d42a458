"""Pure-numpy implementations of the hot kernels.

These are the fallback twins of the numba versions in `_numba_impl`; the
package selects between them at import time (see `pceval.kernels`). Both
backends must produce identical nearest-neighbor results and exact-solver
assignments; auction assignments may differ between backends but both are
certified against the same duality-gap bound.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"

# Query rows processed per block; bounds the (block, M, 3) broadcast buffer.
_NN_BLOCK = 256


def nearest_neighbors(query: np.ndarray, reference: np.ndarray):
    """For each query point, index and squared distance of its nearest
    reference point. Ties break toward the smallest reference index.

    Returns:
        (indices int64 (N,), squared_distances float64 (N,))
    """
    query = np.ascontiguousarray(query, dtype=np.float64)
    reference = np.ascontiguousarray(reference, dtype=np.float64)
    n = query.shape[0]
    idx = np.empty(n, dtype=np.int64)
    sq = np.empty(n, dtype=np.float64)
    for start in range(0, n, _NN_BLOCK):
        q = query[start : start + _NN_BLOCK]
        diff = q[:, None, :] - reference[None, :, :]
        # per-axis squares summed left to right: same rounding as the
        # scalar numba loop, so the backends agree bitwise
        d2 = diff[:, :, 0] ** 2 + diff[:, :, 1] ** 2 + diff[:, :, 2] ** 2
        j = d2.argmin(axis=1)  # argmin keeps the first (smallest) index on ties
        idx[start : start + _NN_BLOCK] = j
        sq[start : start + _NN_BLOCK] = d2[np.arange(q.shape[0]), j]
    return idx, sq


def solve_assignment(cost: np.ndarray):
    """Exact minimum-cost perfect matching on a square cost matrix.

    Shortest-augmenting-path algorithm with dual variables (Jonker-Volgenant
    style): one Dijkstra-like search per row, then augment along the path.

    Returns:
        (col4row int64 (n,), total_cost float) where row i is matched to
        column col4row[i].
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n = cost.shape[0]
    u = np.zeros(n)
    v = np.zeros(n)
    col4row = np.full(n, -1, dtype=np.int64)
    row4col = np.full(n, -1, dtype=np.int64)

    for cur_row in range(n):
        shortest = np.full(n, np.inf)
        path = np.full(n, -1, dtype=np.int64)
        scanned_rows = np.zeros(n, dtype=bool)
        scanned_cols = np.zeros(n, dtype=bool)
        remaining = np.arange(n)
        min_val = 0.0
        i = cur_row
        sink = -1
        while sink == -1:
            scanned_rows[i] = True
            reduced = min_val + cost[i, remaining] - u[i] - v[remaining]
            better = reduced < shortest[remaining]
            cols = remaining[better]
            shortest[cols] = reduced[better]
            path[cols] = i

            vals = shortest[remaining]
            lowest = vals.min()
            min_val = lowest
            tied = remaining[vals == lowest]
            free = tied[row4col[tied] < 0]
            j = int(free[0] if free.size else tied[0])
            scanned_cols[j] = True
            remaining = remaining[remaining != j]
            if row4col[j] < 0:
                sink = j
            else:
                i = row4col[j]

        u[cur_row] += min_val
        others = scanned_rows.copy()
        others[cur_row] = False
        rows = np.nonzero(others)[0]
        u[rows] += min_val - shortest[col4row[rows]]
        cols = np.nonzero(scanned_cols)[0]
        v[cols] -= min_val - shortest[cols]

        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur_row:
                break

    total = float(cost[np.arange(n), col4row].sum())
    return col4row, total


def auction_phase(
    benefit: np.ndarray,
    prices: np.ndarray,
    eps: float,
    item4bidder: np.ndarray,
    bidder4item: np.ndarray,
    max_bids: int,
) -> int:
    """One forward-auction phase (Jacobi sweeps) at fixed eps.

    All unassigned bidders bid simultaneously each sweep; the highest bid per
    item wins. Mutates `prices`, `item4bidder`, `bidder4item` in place.

    Returns:
        Number of bids placed, or -1 if `max_bids` was exceeded before a
        complete assignment formed.
    """
    n = benefit.shape[0]
    if n == 1:
        item4bidder[0] = 0
        bidder4item[0] = 0
        return 1
    bids_used = 0
    while True:
        unassigned = np.nonzero(item4bidder < 0)[0]
        if unassigned.size == 0:
            return bids_used
        bids_used += int(unassigned.size)
        if bids_used > max_bids:
            return -1

        values = benefit[unassigned] - prices[None, :]
        best_j = values.argmax(axis=1)
        sub = np.arange(unassigned.size)
        best_val = values[sub, best_j]
        values[sub, best_j] = -np.inf
        second_val = values.max(axis=1)
        bids = best_val - second_val + eps

        # Highest bid per contested item wins; lexsort puts it last per group.
        order = np.lexsort((bids, best_j))
        j_sorted = best_j[order]
        last = np.nonzero(np.r_[j_sorted[1:] != j_sorted[:-1], True])[0]
        win_items = j_sorted[last]
        win_bidders = unassigned[order[last]]
        win_bids = bids[order[last]]

        prices[win_items] += win_bids
        prev = bidder4item[win_items]
        item4bidder[prev[prev >= 0]] = -1
        bidder4item[win_items] = win_bidders
        item4bidder[win_bidders] = win_items
    return bids_used
