"""Experiment harness: dataset splits, baselines, stress fixtures, and
checkpoint selection.

The memorization baseline and the hedging fixture are sanity probes for the
set-level metrics: the first should score near-perfectly on matching-based
metrics, the second is built to look good under Chamfer while being a poor
sample set, which EMD-based metrics should expose.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .distances import DistanceKind, worker_count
from .errors import (
    EmptyInputError,
    FormatError,
    InsufficientDataError,
    ValidationError,
)
from .geometry import as_pointcloud, voxelize
from .set_metrics import EvalProtocolConfig, jsd, mmd

# Tolerates float dust in cumulative ratio sums: 20 * 0.85 is slightly
# under 17 in IEEE arithmetic and a bare floor would misplace the boundary.
_RATIO_EPS = 1e-9


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint, exhaustive index split of range(n_items)."""

    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    seed: int

    def __post_init__(self):
        for name in ("train", "validation", "test"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))

    @property
    def n_items(self) -> int:
        return self.train.size + self.validation.size + self.test.size


def split_dataset(n_items: int, ratios, seed: int) -> DatasetSplit:
    """Shuffle range(n_items) and cut it into train/validation/test.

    Boundary b_k = floor(n_items * cumulative_ratio_k + 1e-9); the epsilon
    keeps exactly representable products like 20 * 0.85 from flooring one
    short. The three ratio values must be positive and sum to 1, and
    n_items must be large enough that every part gets at least one item.
    """
    if int(n_items) < 3:
        raise ValidationError("n_items must be >= 3 so every part can be non-empty")
    parts = [float(r) for r in ratios]
    if len(parts) != 3:
        raise ValidationError("ratios must have exactly three entries")
    if min(parts) <= 0.0 or abs(sum(parts) - 1.0) > 1e-9:
        raise ValidationError("ratios must be positive and sum to 1")

    b1 = int(np.floor(n_items * parts[0] + _RATIO_EPS))
    b2 = int(np.floor(n_items * (parts[0] + parts[1]) + _RATIO_EPS))
    if b1 < 1 or b2 - b1 < 1 or n_items - b2 < 1:
        raise ValidationError(
            f"n_items={n_items} is too small for non-empty parts at ratios {parts}"
        )
    perm = np.random.default_rng(seed).permutation(n_items)
    return DatasetSplit(
        train=perm[:b1], validation=perm[b1:b2], test=perm[b2:], seed=int(seed)
    )


def memorization_baseline(train_set, size: int, seed: int, with_replacement: bool = False):
    """Draw `size` clouds verbatim from the training set.

    This baseline memorizes instead of generating; it bounds what the
    matching-based metrics reward. Without replacement, size must not
    exceed the training set size.
    """
    clouds = [as_pointcloud(c) for c in train_set]
    if not clouds:
        raise EmptyInputError("train_set must contain at least one cloud")
    if int(size) < 1:
        raise ValidationError("size must be >= 1")
    if not with_replacement and size > len(clouds):
        raise InsufficientDataError(
            f"cannot draw {size} clouds from {len(clouds)} without replacement"
        )
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(clouds), size=int(size), replace=bool(with_replacement))
    return [clouds[i].copy() for i in idx]


def _densest_point(points: np.ndarray) -> int:
    """Index of the point with the smallest mean distance to its (up to) 32
    nearest neighbors."""
    n = points.shape[0]
    k = min(32, n - 1)
    if k == 0:
        return 0
    # k+1 because the nearest hit of a self-query is the point itself
    dists, _ = cKDTree(points).query(points, k=k + 1, workers=worker_count())
    return int(dists[:, 1:].mean(axis=1).argmin())


def hedging_fixture(reference, hot_fraction: float, spread: float, seed: int) -> np.ndarray:
    """Build a cloud that games nearest-neighbor metrics against `reference`.

    A hot cluster of round(hot_fraction * N) points duplicates the reference
    points nearest its densest point, jittered with sigma = spread / 10; the
    remaining points are scattered over the reference bounding box at mutual
    spacing >= spread by dart throwing. The spacing is best effort: after a
    large per-point attempt budget a candidate is accepted regardless, so
    the call never fails even when the requested spacing is infeasible.

    Draw order: hot-cluster jitter first, then scatter candidates.

    Raises:
        ValidationError: hot_fraction outside (0, 1) or non-positive spread.
    """
    ref = as_pointcloud(reference)
    hot_fraction = float(hot_fraction)
    spread = float(spread)
    if not (0.0 < hot_fraction < 1.0):
        raise ValidationError("hot_fraction must lie strictly between 0 and 1")
    if not (spread > 0.0 and np.isfinite(spread)):
        raise ValidationError("spread must be positive and finite")

    n = ref.shape[0]
    n_hot = min(int(round(hot_fraction * n)), n)
    n_sparse = n - n_hot
    rng = np.random.default_rng(seed)

    center = ref[_densest_point(ref)]
    sq = np.square(ref - center).sum(axis=1)
    hot_idx = np.argsort(sq, kind="stable")[:n_hot]
    hot = ref[hot_idx] + rng.normal(scale=spread / 10.0, size=(n_hot, 3))

    lo = ref.min(axis=0)
    hi = ref.max(axis=0)
    accepted = np.empty((n_sparse, 3), dtype=np.float64)
    for count in range(n_sparse):
        for _ in range(200):
            cand = rng.uniform(lo, hi)
            if not count:
                break
            nearest = np.square(accepted[:count] - cand).sum(axis=1).min()
            if nearest >= spread * spread:
                break
        accepted[count] = cand

    return np.concatenate([hot, accepted], axis=0)


def crop_halfspace(
    points,
    normal,
    keep_fraction: float,
    resample_to: int | None = None,
    seed: int | None = None,
    with_replacement: bool = False,
) -> np.ndarray:
    """Keep the fraction of points lowest along `normal`, simulating a
    partial scan; optionally resample the kept points to a fixed count.

    The kept points are those with the smallest projection onto the
    (normalized) normal; ties keep the earlier row. Resampling draws
    point indices with a seeded rng, so `seed` is required when
    `resample_to` is set; upsampling requires with_replacement=True.
    """
    pts = as_pointcloud(points)
    nrm = np.asarray(normal, dtype=np.float64).reshape(-1)
    if nrm.shape != (3,) or not np.isfinite(nrm).all():
        raise ValidationError("normal must be a finite 3-vector")
    length = float(np.linalg.norm(nrm))
    if length == 0.0:
        raise ValidationError("normal must be non-zero")
    keep_fraction = float(keep_fraction)
    if not (0.0 < keep_fraction < 1.0):
        raise ValidationError("keep_fraction must lie strictly between 0 and 1")

    n_keep = min(max(int(round(keep_fraction * pts.shape[0])), 1), pts.shape[0])
    proj = pts @ (nrm / length)
    keep_idx = np.argsort(proj, kind="stable")[:n_keep]
    kept = pts[np.sort(keep_idx)]

    if resample_to is None:
        return kept
    if int(resample_to) < 1:
        raise ValidationError("resample_to must be >= 1")
    if seed is None:
        raise ValidationError("seed is required when resampling")
    if resample_to > kept.shape[0] and not with_replacement:
        raise InsufficientDataError(
            f"cannot resample {kept.shape[0]} points up to {resample_to} without replacement"
        )
    rng = np.random.default_rng(seed)
    idx = rng.choice(kept.shape[0], size=int(resample_to), replace=bool(with_replacement))
    return kept[idx]


@dataclass(frozen=True)
class CheckpointSeries:
    """Ordered (label, path) pairs of sample-set checkpoints; labels must be
    strictly increasing integers (e.g. training epochs)."""

    entries: tuple

    def __post_init__(self):
        entries = tuple((int(label), str(path)) for label, path in self.entries)
        if not entries:
            raise ValidationError("checkpoint series must not be empty")
        labels = [e[0] for e in entries]
        if any(b <= a for a, b in zip(labels, labels[1:])):
            raise ValidationError("checkpoint labels must be strictly increasing")
        object.__setattr__(self, "entries", entries)


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of checkpoint selection: the minimizing label, the criterion
    used, and the full (label, value) trace."""

    chosen_label: int
    criterion: str
    trace: tuple

    def __post_init__(self):
        trace = tuple((int(lbl), float(val)) for lbl, val in self.trace)
        if not trace:
            raise ValidationError("selection trace must not be empty")
        values = [v for _, v in trace]
        best = trace[int(np.argmin(values))][0]  # argmin: earliest label on ties
        if best != self.chosen_label:
            raise ValidationError("chosen_label does not minimize the trace")
        object.__setattr__(self, "trace", trace)


_CRITERIA = ("jsd", "mmd-cd")


def select_model(
    series: CheckpointSeries,
    validation_set,
    criterion: str = "jsd",
    config: EvalProtocolConfig = EvalProtocolConfig(),
) -> SelectionResult:
    """Pick the checkpoint whose samples score best against validation data.

    Every checkpoint path must be a readable point-cloud-set file; its
    clouds are scored against `validation_set` with the chosen criterion
    (occupancy JSD or Chamfer minimum matching distance, using the grid and
    Chamfer convention from `config`) and the label with the smallest value
    wins, earliest label on ties.

    Raises:
        OSError / FormatError: a checkpoint is unreadable or malformed; the
            message names the offending label.
    """
    if criterion not in _CRITERIA:
        raise ValidationError(f"criterion must be one of {_CRITERIA}")
    validation = [as_pointcloud(c) for c in validation_set]
    if not validation:
        raise EmptyInputError("validation_set must contain at least one cloud")

    from .formats import read_pcset  # local import: formats imports geometry only

    val_hist = voxelize(validation, config.grid) if criterion == "jsd" else None
    trace = []
    for label, path in series.entries:
        try:
            samples = read_pcset(path)
        except FormatError as exc:
            raise FormatError(f"checkpoint {label}: {exc}") from exc
        except OSError as exc:
            raise OSError(f"checkpoint {label}: {exc}") from exc
        if criterion == "jsd":
            value = jsd(voxelize(samples, config.grid), val_hist)
        else:
            value = mmd(
                samples,
                validation,
                DistanceKind.CHAMFER,
                chamfer_normalize=config.chamfer_normalize,
            )
        trace.append((label, value))

    values = [v for _, v in trace]
    chosen = trace[int(np.argmin(values))][0]
    return SelectionResult(chosen_label=chosen, criterion=criterion, trace=tuple(trace))
