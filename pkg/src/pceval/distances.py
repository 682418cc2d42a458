"""Distances between point clouds: Chamfer and earth mover's distance.

Chamfer permits unequal cloud sizes and is kd-tree accelerated. EMD is a
perfect matching, so the clouds must have equal cardinality; small problems
are solved exactly, large ones by a certified auction approximation.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from . import kernels
from .errors import UnequalCardinalityError, ValidationError
from .geometry import as_pointcloud


class DistanceKind(enum.Enum):
    """Cloud-to-cloud distance selector used by the set-level metrics."""

    CHAMFER = "cd"
    EMD = "emd"


def worker_count() -> int:
    """Parallel worker cap: PCEVAL_THREADS if set (>= 1), else cpu count."""
    raw = os.environ.get("PCEVAL_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise ValidationError(f"PCEVAL_THREADS must be an integer, got {raw!r}") from exc
        if n < 1:
            raise ValidationError("PCEVAL_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class EmdConfig:
    """Knobs for the EMD solver.

    exact_threshold: largest N solved exactly; above it the auction
        approximation runs with relative tolerance `epsilon`.
    normalize: divide the matching cost by N.
    max_phases / bid_budget: auction safety budgets (see
        kernels.solve_assignment_auction).
    """

    exact_threshold: int = 512
    epsilon: float = 1e-3
    normalize: bool = True
    max_phases: int = 60
    bid_budget: int = 20_000_000

    def __post_init__(self):
        if int(self.exact_threshold) < 1:
            raise ValidationError("exact_threshold must be >= 1")
        if not (0.0 < float(self.epsilon) < 1.0):
            raise ValidationError("epsilon must be in (0, 1)")
        if int(self.max_phases) < 1 or int(self.bid_budget) < 1:
            raise ValidationError("auction budgets must be >= 1")


def chamfer(s1, s2, normalize: bool = True) -> float:
    """Symmetric Chamfer distance built from squared Euclidean distances.

    Each point is matched to its nearest neighbor in the other cloud; the
    two directed sums of squared distances are added. With normalize=True
    each directed sum is divided by the size of the cloud it ranges over,
    making the value comparable across cardinalities.

    Nearest-neighbor lookups run on a kd-tree, so the result matches the
    brute-force definition to float64 round-off.
    """
    a = as_pointcloud(s1)
    b = as_pointcloud(s2)
    workers = worker_count()
    d_ab = cKDTree(b).query(a, k=1, workers=workers)[0]
    d_ba = cKDTree(a).query(b, k=1, workers=workers)[0]
    fwd = float(np.square(d_ab).sum())
    bwd = float(np.square(d_ba).sum())
    if normalize:
        return fwd / a.shape[0] + bwd / b.shape[0]
    return fwd + bwd


def nearest_neighbor_index(query, reference):
    """Index into `reference` of each query point's nearest neighbor, plus
    the exact squared distance. Ties break toward the smallest index.

    Returns:
        (indices int64 (N,), squared_distances float64 (N,))
    """
    q = as_pointcloud(query)
    r = as_pointcloud(reference)
    return kernels.nearest_neighbors(q, r)


def _sorted_rows(pts: np.ndarray) -> np.ndarray:
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))
    return pts[order]


def emd(s1, s2, config: EmdConfig = EmdConfig()) -> float:
    """Earth mover's distance: minimum-cost perfect matching under the
    (non-squared) Euclidean ground distance.

    The two clouds must have equal cardinality N. For N up to
    config.exact_threshold the matching is exact; beyond that an
    epsilon-scaling auction produces a value certified to lie within
    config.epsilon relative error of optimal. With normalize=True the
    matching cost is divided by N.

    Raises:
        UnequalCardinalityError: clouds differ in size.
        ApproximationFailureError: auction budget exhausted (carries the
            best value and bound found).
    """
    a = as_pointcloud(s1)
    b = as_pointcloud(s2)
    n = a.shape[0]
    if n != b.shape[0]:
        raise UnequalCardinalityError(
            f"EMD requires equal cardinalities, got {n} and {b.shape[0]}"
        )

    # Identical multisets match at zero cost; skip the solver entirely.
    if np.array_equal(_sorted_rows(a), _sorted_rows(b)):
        return 0.0

    cost = cdist(a, b)
    if n <= config.exact_threshold:
        _, total = kernels.solve_assignment(cost)
    else:
        _, total, _ = kernels.solve_assignment_auction(
            cost,
            rel_tol=config.epsilon,
            max_phases=config.max_phases,
            bid_budget=config.bid_budget,
        )
    return total / n if config.normalize else total
