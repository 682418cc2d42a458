"""Point-cloud generative-model evaluation toolkit.

Distances between clouds (Chamfer, earth mover's), set-level sample-quality
metrics (JSD, coverage, minimum matching distance) with an oversampled
evaluation protocol, a from-scratch Gaussian-mixture latent pipeline, and
the file formats and experiment harness to drive it all from the CLI.
"""

from .aux_metrics import CompletionScore, completion_score, threshold_grid, voxel_iou
from .distances import DistanceKind, EmdConfig, chamfer, emd, nearest_neighbor_index
from .errors import (
    ApproximationFailureError,
    DecoderFailureError,
    DegenerateFitError,
    DegenerateMeshError,
    EmptyInputError,
    FormatError,
    GridMismatchError,
    InsufficientDataError,
    PcevalError,
    ProtocolViolationError,
    UndefinedIouError,
    UnequalCardinalityError,
    ValidationError,
)
from .geometry import (
    BinaryVoxelGrid,
    GridSpec,
    OccupancyHistogram,
    TriangleMesh,
    as_pointcloud,
    normalize_unit_sphere,
    rotate_z,
    sample_mesh,
    voxelize,
)
from .gmm import EmConfig, EmFitDiagnostics, GmmModel, fit_em, gmm_sample, log_likelihood
from .harness import (
    CheckpointSeries,
    DatasetSplit,
    SelectionResult,
    crop_halfspace,
    hedging_fixture,
    memorization_baseline,
    select_model,
    split_dataset,
)
from .latent import (
    DecoderAdapter,
    ExternalProcessDecoder,
    ToyLinearDecoder,
    analogy,
    apply_edit,
    attribute_vector,
    decode,
    interpolate,
)
from .set_metrics import (
    EvalProtocolConfig,
    MetricsReport,
    RepetitionMetrics,
    coverage,
    distance_matrix,
    evaluate_generator,
    jsd,
    mmd,
)

__version__ = "0.1.0"

__all__ = [
    "ApproximationFailureError",
    "BinaryVoxelGrid",
    "CheckpointSeries",
    "CompletionScore",
    "DatasetSplit",
    "DecoderAdapter",
    "DecoderFailureError",
    "DegenerateFitError",
    "DegenerateMeshError",
    "DistanceKind",
    "EmConfig",
    "EmFitDiagnostics",
    "EmdConfig",
    "EmptyInputError",
    "EvalProtocolConfig",
    "ExternalProcessDecoder",
    "FormatError",
    "GmmModel",
    "GridMismatchError",
    "GridSpec",
    "InsufficientDataError",
    "MetricsReport",
    "OccupancyHistogram",
    "PcevalError",
    "ProtocolViolationError",
    "RepetitionMetrics",
    "SelectionResult",
    "ToyLinearDecoder",
    "TriangleMesh",
    "UndefinedIouError",
    "UnequalCardinalityError",
    "ValidationError",
    "analogy",
    "apply_edit",
    "as_pointcloud",
    "attribute_vector",
    "chamfer",
    "completion_score",
    "coverage",
    "crop_halfspace",
    "decode",
    "distance_matrix",
    "emd",
    "evaluate_generator",
    "fit_em",
    "gmm_sample",
    "hedging_fixture",
    "interpolate",
    "jsd",
    "log_likelihood",
    "memorization_baseline",
    "mmd",
    "nearest_neighbor_index",
    "normalize_unit_sphere",
    "rotate_z",
    "sample_mesh",
    "select_model",
    "split_dataset",
    "threshold_grid",
    "voxel_iou",
    "voxelize",
]
