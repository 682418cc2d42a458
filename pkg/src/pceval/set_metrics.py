"""Set-level comparison of sample collections against a reference collection.

Covers the occupancy-based Jensen-Shannon divergence, matching-based
coverage and minimum matching distance over a cloud-to-cloud distance
matrix, and the oversampled repeated-evaluation protocol that ties them
together into a single report.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import rel_entr

from .distances import DistanceKind, EmdConfig, chamfer, emd, worker_count
from .errors import (
    EmptyInputError,
    ProtocolViolationError,
    ValidationError,
)
from .geometry import GridSpec, OccupancyHistogram, as_pointcloud, require_same_grid, voxelize


def jsd(hist_a: OccupancyHistogram, hist_b: OccupancyHistogram) -> float:
    """Jensen-Shannon divergence between two occupancy histograms, in nats.

    Counts are normalized to distributions P and Q; with M = (P + Q) / 2 the
    value is KL(P||M)/2 + KL(Q||M)/2 using the natural logarithm, and the
    0 * log 0 terms drop out. Bounded by ln 2.

    Raises:
        GridMismatchError: the histograms use different grids.
        EmptyInputError: either histogram has zero total count.
    """
    require_same_grid(hist_a.spec, hist_b.spec)
    ta, tb = hist_a.total, hist_b.total
    if ta == 0 or tb == 0:
        raise EmptyInputError("JSD requires non-empty histograms on both sides")
    p = hist_a.counts / ta
    q = hist_b.counts / tb
    m = 0.5 * (p + q)
    val = 0.5 * (rel_entr(p, m).sum() + rel_entr(q, m).sum())
    return max(float(val), 0.0)


def _validate_cloud_list(clouds, label: str):
    arrays = [as_pointcloud(c) for c in clouds]
    if not arrays:
        raise EmptyInputError(f"{label} must contain at least one cloud")
    return arrays


def _cloud_distance(a, b, kind, emd_config, chamfer_normalize):
    if kind == DistanceKind.CHAMFER:
        return chamfer(a, b, normalize=chamfer_normalize)
    return emd(a, b, config=emd_config)


def distance_matrix(
    set_a,
    set_b,
    kind: DistanceKind,
    emd_config: EmdConfig = EmdConfig(),
    chamfer_normalize: bool = True,
) -> np.ndarray:
    """All pairwise cloud distances: entry [i, j] = d(set_a[i], set_b[j]).

    Rows are computed in parallel worker threads (capped by PCEVAL_THREADS);
    every entry is an independent distance call, so the result is identical
    to the serial loop.
    """
    arrays_a = _validate_cloud_list(set_a, "set_a")
    arrays_b = _validate_cloud_list(set_b, "set_b")
    if not isinstance(kind, DistanceKind):
        raise ValidationError(f"kind must be a DistanceKind, got {kind!r}")

    out = np.empty((len(arrays_a), len(arrays_b)), dtype=np.float64)

    def fill_row(i: int):
        row = out[i]
        a = arrays_a[i]
        for j, b in enumerate(arrays_b):
            row[j] = _cloud_distance(a, b, kind, emd_config, chamfer_normalize)

    workers = min(worker_count(), len(arrays_a))
    if workers <= 1:
        for i in range(len(arrays_a)):
            fill_row(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill_row, range(len(arrays_a))))
    return out


def coverage(
    sample_set,
    reference_set,
    kind: DistanceKind,
    emd_config: EmdConfig = EmdConfig(),
    chamfer_normalize: bool = True,
    dmatrix: np.ndarray | None = None,
) -> float:
    """Fraction of reference clouds matched by at least one sample.

    Each sample cloud is matched to its nearest reference cloud (ties to the
    smallest reference index); coverage is |distinct matched references| /
    |reference_set|. Pass `dmatrix` (samples x references) to reuse a
    precomputed distance matrix.
    """
    if dmatrix is None:
        dmatrix = distance_matrix(
            sample_set, reference_set, kind, emd_config, chamfer_normalize
        )
    dmatrix = np.asarray(dmatrix, dtype=np.float64)
    if dmatrix.ndim != 2 or dmatrix.size == 0:
        raise EmptyInputError("coverage requires a non-empty distance matrix")
    matched = dmatrix.argmin(axis=1)
    return np.unique(matched).size / dmatrix.shape[1]


def mmd(
    sample_set,
    reference_set,
    kind: DistanceKind,
    emd_config: EmdConfig = EmdConfig(),
    chamfer_normalize: bool = True,
    dmatrix: np.ndarray | None = None,
) -> float:
    """Minimum matching distance: for every reference cloud, the distance to
    its closest sample, averaged over the reference set. Lower is better;
    zero iff every reference appears verbatim among the samples.
    """
    if dmatrix is None:
        dmatrix = distance_matrix(
            sample_set, reference_set, kind, emd_config, chamfer_normalize
        )
    dmatrix = np.asarray(dmatrix, dtype=np.float64)
    if dmatrix.ndim != 2 or dmatrix.size == 0:
        raise EmptyInputError("mmd requires a non-empty distance matrix")
    return float(dmatrix.min(axis=0).mean())


@dataclass(frozen=True)
class EvalProtocolConfig:
    """Protocol settings for `evaluate_generator`.

    Per repetition the generator must supply oversample_factor * |reference|
    sample clouds; metrics are averaged over `repetitions` repetitions.
    """

    oversample_factor: int = 3
    repetitions: int = 3
    grid: GridSpec = field(default_factory=GridSpec)
    emd: EmdConfig = field(default_factory=EmdConfig)
    chamfer_normalize: bool = True
    master_seed: int | None = None

    def __post_init__(self):
        if int(self.oversample_factor) < 1:
            raise ValidationError("oversample_factor must be >= 1")
        if int(self.repetitions) < 1:
            raise ValidationError("repetitions must be >= 1")

    def fingerprint(self) -> dict:
        """Plain-dict description of every setting that affects results."""
        return {
            "oversample_factor": int(self.oversample_factor),
            "repetitions": int(self.repetitions),
            "grid": {
                "resolution": self.grid.resolution,
                "center": list(self.grid.center),
                "half_width": self.grid.half_width,
            },
            "emd": {
                "exact_threshold": self.emd.exact_threshold,
                "epsilon": self.emd.epsilon,
                "normalize": self.emd.normalize,
            },
            "chamfer_normalize": bool(self.chamfer_normalize),
            "master_seed": self.master_seed,
            "jsd_log": "e",
        }


@dataclass(frozen=True)
class RepetitionMetrics:
    """Metrics from a single protocol repetition."""

    jsd: float
    mmd_cd: float
    mmd_emd: float
    cov_cd: float
    cov_emd: float


@dataclass(frozen=True)
class MetricsReport:
    """Aggregated evaluation result: per-repetition metrics plus their means.

    Invariants are checked at construction: aggregate values equal the means
    of the per-repetition values, coverages lie in [0, 1], and JSD respects
    its ln 2 bound.
    """

    jsd: float
    mmd_cd: float
    mmd_emd: float
    cov_cd: float
    cov_emd: float
    per_repetition: tuple[RepetitionMetrics, ...]
    repetitions: int
    sample_size: int
    reference_size: int
    config: dict

    def __post_init__(self):
        if not self.per_repetition:
            raise ValidationError("report requires at least one repetition")
        if self.repetitions != len(self.per_repetition):
            raise ValidationError("repetitions must match the per-repetition values")
        if self.sample_size < 1 or self.reference_size < 1:
            raise ValidationError("sample and reference sizes must be positive")
        for name in ("jsd", "mmd_cd", "mmd_emd", "cov_cd", "cov_emd"):
            agg = getattr(self, name)
            mean = float(np.mean([getattr(r, name) for r in self.per_repetition]))
            if abs(agg - mean) > 1e-12:
                raise ValidationError(f"aggregate {name} does not match repetition mean")
        for r in self.per_repetition:
            if not (0.0 <= r.cov_cd <= 1.0 and 0.0 <= r.cov_emd <= 1.0):
                raise ValidationError("coverage values must lie in [0, 1]")
            if r.jsd < 0.0 or r.jsd > np.log(2.0) + 1e-12:
                raise ValidationError("jsd out of [0, ln 2] range")
            if r.mmd_cd < 0.0 or r.mmd_emd < 0.0:
                raise ValidationError("mmd values must be non-negative")


def evaluate_generator(sample_groups, reference_set, config: EvalProtocolConfig = EvalProtocolConfig()) -> MetricsReport:
    """Run the repeated oversampled evaluation protocol.

    Args:
        sample_groups: one sequence of sample clouds per repetition; exactly
            config.repetitions groups, each of size
            config.oversample_factor * len(reference_set).
        reference_set: held-out reference clouds.
        config: protocol settings.

    Returns:
        MetricsReport with per-repetition values and their means.

    Raises:
        ProtocolViolationError: group count or group sizes do not match the
            protocol.
    """
    refs = _validate_cloud_list(reference_set, "reference_set")
    groups = list(sample_groups)
    if len(groups) != config.repetitions:
        raise ProtocolViolationError(
            f"expected {config.repetitions} sample groups, got {len(groups)}"
        )
    want = config.oversample_factor * len(refs)
    validated_groups = []
    for k, group in enumerate(groups):
        arrays = _validate_cloud_list(group, f"sample group {k}")
        if len(arrays) != want:
            raise ProtocolViolationError(
                f"sample group {k} has {len(arrays)} clouds, protocol requires {want}"
            )
        validated_groups.append(arrays)

    ref_hist = voxelize(refs, config.grid)
    reps = []
    for arrays in validated_groups:
        d_cd = distance_matrix(
            arrays, refs, DistanceKind.CHAMFER, config.emd, config.chamfer_normalize
        )
        d_emd = distance_matrix(arrays, refs, DistanceKind.EMD, config.emd)
        reps.append(
            RepetitionMetrics(
                jsd=jsd(voxelize(arrays, config.grid), ref_hist),
                mmd_cd=mmd(arrays, refs, DistanceKind.CHAMFER, dmatrix=d_cd),
                mmd_emd=mmd(arrays, refs, DistanceKind.EMD, dmatrix=d_emd),
                cov_cd=coverage(arrays, refs, DistanceKind.CHAMFER, dmatrix=d_cd),
                cov_emd=coverage(arrays, refs, DistanceKind.EMD, dmatrix=d_emd),
            )
        )

    return MetricsReport(
        jsd=float(np.mean([r.jsd for r in reps])),
        mmd_cd=float(np.mean([r.mmd_cd for r in reps])),
        mmd_emd=float(np.mean([r.mmd_emd for r in reps])),
        cov_cd=float(np.mean([r.cov_cd for r in reps])),
        cov_emd=float(np.mean([r.cov_emd for r in reps])),
        per_repetition=tuple(reps),
        repetitions=len(reps),
        sample_size=want,
        reference_size=len(refs),
        config=config.fingerprint(),
    )
