"""Hot numeric kernels with twin numba / pure-numpy implementations.

Backend selection happens lazily on first use: numba when importable (the
default), pure numpy when the environment variable PCEVAL_NUMBA is set to
0/false/off/no or numba is missing. `set_backend` forces a choice for tests
and benchmarks; `active_backend` reports what is in effect.

Exposed kernels:
    nearest_neighbors(query, reference) -> (indices, squared_distances)
    solve_assignment(cost) -> (col4row, total_cost)            exact
    solve_assignment_auction(cost, rel_tol, ...) -> (col4row, primal, lower_bound)
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import ApproximationFailureError, ValidationError

_FORCED: str | None = None
_RESOLVED = None  # (name, module) after first use


def _env_allows_numba() -> bool:
    val = os.environ.get("PCEVAL_NUMBA", "").strip().lower()
    return val not in {"0", "false", "off", "no"}


def _resolve():
    global _RESOLVED
    if _RESOLVED is not None:
        return _RESOLVED
    choice = _FORCED
    if choice is None:
        choice = "numba" if _env_allows_numba() else "numpy"
    if choice == "numba":
        try:
            from . import _numba_impl as impl
        except ImportError:
            from . import _numpy_impl as impl
    else:
        from . import _numpy_impl as impl
    _RESOLVED = (impl.BACKEND_NAME, impl)
    return _RESOLVED


def set_backend(name: str | None) -> None:
    """Force the kernel backend ("numba" or "numpy"), or None to re-resolve
    from the environment on next use."""
    global _FORCED, _RESOLVED
    if name not in (None, "numba", "numpy"):
        raise ValidationError(f"unknown kernel backend {name!r}")
    _FORCED = name
    _RESOLVED = None


def active_backend() -> str:
    return _resolve()[0]


def nearest_neighbors(query: np.ndarray, reference: np.ndarray):
    """Nearest reference index and exact squared distance per query point.

    Ties break toward the smallest reference index on both backends.
    """
    return _resolve()[1].nearest_neighbors(query, reference)


def solve_assignment(cost: np.ndarray):
    """Exact minimum-cost perfect matching; returns (col4row, total_cost).

    The total is summed here, outside the backend, so both backends report
    bit-identical values for the same optimal matching.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    col4row, _ = _resolve()[1].solve_assignment(cost)
    total = float(cost[np.arange(cost.shape[0]), col4row].sum())
    return col4row, total


def solve_assignment_auction(
    cost: np.ndarray,
    rel_tol: float = 1e-3,
    max_phases: int = 60,
    bid_budget: int = 20_000_000,
    scale: float = 8.0,
):
    """Approximate min-cost perfect matching by forward auction with
    epsilon scaling, certified by a duality gap.

    Prices persist across scaling phases. After each phase the primal value
    of the complete assignment is compared against the dual lower bound
    sum_i min_j (C_ij + p_j) - sum_j p_j; the loop stops once

        primal - lower_bound <= rel_tol * max(lower_bound, 0) + 1e-12.

    Args:
        cost: square (n, n) float matrix.
        rel_tol: certified relative error bound on the returned value.
        max_phases: epsilon-scaling phases before giving up.
        bid_budget: per-phase bid limit before giving up.
        scale: factor by which eps shrinks between phases.

    Returns:
        (col4row, primal_value, lower_bound) for the best assignment found.

    Raises:
        ApproximationFailureError: budget exhausted before certification;
            carries the best primal value and lower bound seen.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n = cost.shape[0]
    if cost.ndim != 2 or cost.shape[1] != n or n == 0:
        raise ValidationError(f"cost must be square and non-empty, got {cost.shape}")
    if n == 1:
        val = float(cost[0, 0])
        return np.zeros(1, dtype=np.int64), val, val

    spread = float(cost.max() - cost.min())
    if spread == 0.0:
        # All entries equal: every permutation is optimal.
        ident = np.arange(n, dtype=np.int64)
        val = float(cost[0, 0]) * n
        return ident, val, val

    impl = _resolve()[1]
    benefit = np.ascontiguousarray(-cost)
    prices = np.zeros(n, dtype=np.float64)
    item4bidder = np.empty(n, dtype=np.int64)
    bidder4item = np.empty(n, dtype=np.int64)
    rows = np.arange(n)

    eps = spread / 4.0
    best_primal = np.inf
    best_assign = None
    best_lb = -np.inf
    for _ in range(max_phases):
        item4bidder.fill(-1)
        bidder4item.fill(-1)
        used = impl.auction_phase(benefit, prices, eps, item4bidder, bidder4item, bid_budget)
        if used < 0:
            break
        primal = float(cost[rows, item4bidder].sum())
        lb = float((cost + prices[None, :]).min(axis=1).sum() - prices.sum())
        if primal < best_primal:
            best_primal = primal
            best_assign = item4bidder.copy()
        best_lb = max(best_lb, lb)
        if best_primal - best_lb <= rel_tol * max(best_lb, 0.0) + 1e-12:
            return best_assign, best_primal, best_lb
        eps = max(eps / scale, 1e-15)

    raise ApproximationFailureError(
        f"auction failed to certify rel_tol={rel_tol} within budget "
        f"(best value {best_primal}, lower bound {best_lb})",
        best_value=best_primal,
        lower_bound=best_lb,
    )
