"""Completion accuracy/coverage and voxel-grid IoU."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distances import nearest_neighbor_index
from .errors import UndefinedIouError, ValidationError
from .geometry import BinaryVoxelGrid, GridSpec, require_same_grid


@dataclass(frozen=True)
class CompletionScore:
    """Fraction-of-points scores for a predicted completion at radius rho.

    accuracy: fraction of predicted points within rho of the ground truth.
    coverage: fraction of ground-truth points within rho of the prediction.
    """

    accuracy: float
    coverage: float
    rho: float

    def __post_init__(self):
        if not (0.0 <= self.accuracy <= 1.0 and 0.0 <= self.coverage <= 1.0):
            raise ValidationError("completion fractions must lie in [0, 1]")
        if not (self.rho > 0.0 and np.isfinite(self.rho)):
            raise ValidationError("rho must be positive and finite")


def completion_score(predicted, truth, rho: float) -> CompletionScore:
    """Score a predicted completion against the ground-truth cloud.

    A point counts as matched when its nearest neighbor in the other cloud
    lies within Euclidean distance rho (inclusive). Both fractions are
    non-decreasing in rho.
    """
    rho = float(rho)
    if not (rho > 0.0 and np.isfinite(rho)):
        raise ValidationError("rho must be positive and finite")
    _, sq_pred = nearest_neighbor_index(predicted, truth)
    _, sq_truth = nearest_neighbor_index(truth, predicted)
    limit = rho * rho
    return CompletionScore(
        accuracy=float(np.count_nonzero(sq_pred <= limit) / sq_pred.shape[0]),
        coverage=float(np.count_nonzero(sq_truth <= limit) / sq_truth.shape[0]),
        rho=rho,
    )


def voxel_iou(grid_a: BinaryVoxelGrid, grid_b: BinaryVoxelGrid) -> float:
    """Intersection-over-union of two binary voxel grids on the same spec.

    Raises:
        GridMismatchError: the grids use different specs.
        UndefinedIouError: both grids are entirely empty.
    """
    require_same_grid(grid_a.spec, grid_b.spec)
    union = int(np.count_nonzero(grid_a.occupied | grid_b.occupied))
    if union == 0:
        raise UndefinedIouError("IoU is undefined when both grids are empty")
    inter = int(np.count_nonzero(grid_a.occupied & grid_b.occupied))
    return inter / union


def threshold_grid(values, threshold: float, spec: GridSpec) -> BinaryVoxelGrid:
    """Binarize a real-valued grid: occupied where value >= threshold.

    `values` may be flat (res^3,) or cubic (res, res, res) in the same
    C-order layout as OccupancyHistogram counts.
    """
    vals = np.asarray(values, dtype=np.float64).reshape(-1)
    if vals.shape[0] != spec.n_cells:
        raise ValidationError(
            f"grid values have {vals.shape[0]} cells, spec expects {spec.n_cells}"
        )
    if not np.isfinite(vals).all():
        raise ValidationError("grid values contain non-finite entries")
    return BinaryVoxelGrid(spec=spec, occupied=vals >= float(threshold))
