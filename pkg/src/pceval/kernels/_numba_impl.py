"""Numba implementations of the hot kernels.

Import of this module raises ImportError when numba is unavailable; the
dispatcher in `pceval.kernels` then falls back to `_numpy_impl`. Signatures
and result contracts match the numpy twins exactly (see that module).
"""

from __future__ import annotations

import numpy as np
from numba import njit

BACKEND_NAME = "numba"


@njit(cache=True, nogil=True)
def _nearest_neighbors_impl(query, reference):
    n = query.shape[0]
    m = reference.shape[0]
    idx = np.empty(n, dtype=np.int64)
    sq = np.empty(n, dtype=np.float64)
    for i in range(n):
        qx, qy, qz = query[i, 0], query[i, 1], query[i, 2]
        best = np.inf
        best_j = -1
        for j in range(m):
            dx = qx - reference[j, 0]
            dy = qy - reference[j, 1]
            dz = qz - reference[j, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < best:  # strict: ties keep the smallest j
                best = d2
                best_j = j
        idx[i] = best_j
        sq[i] = best
    return idx, sq


def nearest_neighbors(query: np.ndarray, reference: np.ndarray):
    query = np.ascontiguousarray(query, dtype=np.float64)
    reference = np.ascontiguousarray(reference, dtype=np.float64)
    return _nearest_neighbors_impl(query, reference)


@njit(cache=True, nogil=True)
def _solve_assignment_impl(cost):
    n = cost.shape[0]
    u = np.zeros(n, dtype=np.float64)
    v = np.zeros(n, dtype=np.float64)
    col4row = np.full(n, -1, dtype=np.int64)
    row4col = np.full(n, -1, dtype=np.int64)
    shortest = np.empty(n, dtype=np.float64)
    path = np.empty(n, dtype=np.int64)
    scanned_rows = np.empty(n, dtype=np.bool_)
    scanned_cols = np.empty(n, dtype=np.bool_)

    for cur_row in range(n):
        shortest[:] = np.inf
        path[:] = -1
        scanned_rows[:] = False
        scanned_cols[:] = False
        min_val = 0.0
        i = cur_row
        sink = -1
        while sink == -1:
            scanned_rows[i] = True
            # Relax all unscanned columns through row i, then pick the
            # cheapest one; prefer an unmatched column among ties so the
            # search can terminate.
            lowest = np.inf
            j_pick = -1
            pick_free = False
            for j in range(n):
                if scanned_cols[j]:
                    continue
                reduced = min_val + cost[i, j] - u[i] - v[j]
                if reduced < shortest[j]:
                    shortest[j] = reduced
                    path[j] = i
                sj = shortest[j]
                if sj < lowest or (sj == lowest and not pick_free and row4col[j] < 0):
                    lowest = sj
                    j_pick = j
                    pick_free = row4col[j] < 0
            min_val = lowest
            j = j_pick
            scanned_cols[j] = True
            if row4col[j] < 0:
                sink = j
            else:
                i = row4col[j]

        u[cur_row] += min_val
        for i2 in range(n):
            if scanned_rows[i2] and i2 != cur_row:
                u[i2] += min_val - shortest[col4row[i2]]
        for j2 in range(n):
            if scanned_cols[j2]:
                v[j2] -= min_val - shortest[j2]

        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            tmp = col4row[i]
            col4row[i] = j
            j = tmp
            if i == cur_row:
                break

    total = 0.0
    for i in range(n):
        total += cost[i, col4row[i]]
    return col4row, total


def solve_assignment(cost: np.ndarray):
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    col4row, total = _solve_assignment_impl(cost)
    return col4row, float(total)


@njit(cache=True, nogil=True)
def _auction_phase_impl(benefit, prices, eps, item4bidder, bidder4item, max_bids):
    n = benefit.shape[0]
    if n == 1:
        item4bidder[0] = 0
        bidder4item[0] = 0
        return 1

    # Gauss-Seidel: one unassigned bidder bids at a time, newest first.
    stack = np.empty(n, dtype=np.int64)
    top = 0
    for i in range(n):
        if item4bidder[i] < 0:
            stack[top] = i
            top += 1

    bids_used = 0
    while top > 0:
        top -= 1
        i = stack[top]
        bids_used += 1
        if bids_used > max_bids:
            return -1

        best_val = -np.inf
        second_val = -np.inf
        best_j = -1
        for j in range(n):
            val = benefit[i, j] - prices[j]
            if val > best_val:
                second_val = best_val
                best_val = val
                best_j = j
            elif val > second_val:
                second_val = val

        prices[best_j] += best_val - second_val + eps
        prev = bidder4item[best_j]
        if prev >= 0:
            item4bidder[prev] = -1
            stack[top] = prev
            top += 1
        bidder4item[best_j] = i
        item4bidder[i] = best_j
    return bids_used


def auction_phase(benefit, prices, eps, item4bidder, bidder4item, max_bids: int) -> int:
    return int(
        _auction_phase_impl(
            np.ascontiguousarray(benefit, dtype=np.float64),
            prices,
            float(eps),
            item4bidder,
            bidder4item,
            int(max_bids),
        )
    )
