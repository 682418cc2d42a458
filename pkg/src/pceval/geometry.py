"""Geometric types and operations on 3D point clouds.

Point clouds are plain float64 arrays of shape (N, 3); there is no wrapper
class. `as_pointcloud` is the single validation/coercion entry point used by
every operation that consumes a cloud.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateMeshError,
    EmptyInputError,
    GridMismatchError,
    ValidationError,
)


def as_pointcloud(points) -> np.ndarray:
    """Validate and coerce input to an (N, 3) float64 array, N >= 1.

    Raises:
        ValidationError: wrong shape, empty, or non-finite coordinates.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValidationError(f"point cloud must have shape (N, 3), got {pts.shape}")
    if pts.shape[0] == 0:
        raise ValidationError("point cloud must contain at least one point")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("point cloud contains non-finite coordinates")
    return pts


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle mesh: float64 vertices (V, 3), int64 faces (F, 3)."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.float64)
        faces = np.asarray(self.faces, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 3 or verts.shape[0] == 0:
            raise ValidationError(f"vertices must have shape (V, 3), got {verts.shape}")
        if not np.all(np.isfinite(verts)):
            raise ValidationError("mesh vertices contain non-finite coordinates")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ValidationError(f"faces must have shape (F, 3), got {faces.shape}")
        if faces.size and (faces.min() < 0 or faces.max() >= verts.shape[0]):
            raise ValidationError("face indices out of vertex range")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    def face_areas(self) -> np.ndarray:
        """Per-face triangle areas, shape (F,)."""
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        cross = np.cross(b - a, c - a)
        return 0.5 * np.linalg.norm(cross, axis=1)


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned cubic voxel grid: `resolution` cells per axis over a cube
    centered at `center` with half-width `half_width` along each axis.

    The default covers [-1, 1]^3 at 28 cells per axis.
    """

    resolution: int = 28
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    half_width: float = 1.0

    def __post_init__(self):
        if int(self.resolution) < 1:
            raise ValidationError("grid resolution must be >= 1")
        object.__setattr__(self, "resolution", int(self.resolution))
        center = tuple(float(c) for c in self.center)
        if len(center) != 3 or not all(np.isfinite(center)):
            raise ValidationError("grid center must be three finite floats")
        object.__setattr__(self, "center", center)
        hw = float(self.half_width)
        if not np.isfinite(hw) or hw <= 0:
            raise ValidationError("grid half_width must be positive and finite")
        object.__setattr__(self, "half_width", hw)

    @property
    def n_cells(self) -> int:
        return self.resolution**3

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center, dtype=np.float64) - self.half_width

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center, dtype=np.float64) + self.half_width

    @property
    def cell_size(self) -> float:
        return 2.0 * self.half_width / self.resolution


def require_same_grid(a: GridSpec, b: GridSpec) -> None:
    if a != b:
        raise GridMismatchError(f"grid specs differ: {a} vs {b}")


@dataclass(frozen=True)
class OccupancyHistogram:
    """Per-cell point counts over a grid, flattened C-order (x-major).

    `clamped` counts input points that fell strictly outside the grid cube
    and were clamped onto the boundary cells.
    """

    spec: GridSpec
    counts: np.ndarray
    clamped: int = 0

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.shape[0] != self.spec.n_cells:
            raise ValidationError(
                f"counts must be flat with {self.spec.n_cells} cells, got {counts.shape}"
            )
        if counts.min(initial=0) < 0:
            raise ValidationError("occupancy counts must be non-negative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "clamped", int(self.clamped))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class BinaryVoxelGrid:
    """Boolean occupancy over a grid, flattened C-order (x-major)."""

    spec: GridSpec
    occupied: np.ndarray

    def __post_init__(self):
        occ = np.asarray(self.occupied)
        if occ.dtype != np.bool_:
            if not np.isin(occ, (0, 1)).all():
                raise ValidationError("voxel occupancy values must be 0 or 1")
            occ = occ.astype(bool)
        occ = occ.reshape(-1)
        if occ.shape[0] != self.spec.n_cells:
            raise ValidationError(
                f"occupancy must have {self.spec.n_cells} cells, got {occ.shape[0]}"
            )
        object.__setattr__(self, "occupied", occ)


def sample_mesh(mesh: TriangleMesh, n_points: int, rng: np.random.Generator) -> np.ndarray:
    """Sample points uniformly by area from a triangle mesh surface.

    Faces are chosen with probability proportional to area; positions within
    a face use the square-root barycentric construction, which is uniform
    over the triangle.

    Args:
        mesh: source mesh; must have positive total area.
        n_points: number of samples, >= 1.
        rng: numpy Generator; consumed deterministically (face draws first,
            then the two barycentric coordinates).

    Returns:
        (n_points, 3) float64 array.
    """
    if n_points < 1:
        raise ValidationError("n_points must be >= 1")
    if mesh.n_faces == 0:
        raise DegenerateMeshError("mesh has no faces")
    areas = mesh.face_areas()
    total = areas.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise DegenerateMeshError("mesh has zero total surface area")

    cum = np.cumsum(areas)
    face_idx = np.searchsorted(cum, rng.random(n_points) * total, side="right")
    face_idx = np.minimum(face_idx, mesh.n_faces - 1)

    r1 = rng.random(n_points)
    r2 = rng.random(n_points)
    sqrt_r1 = np.sqrt(r1)
    u = 1.0 - sqrt_r1
    v = r2 * sqrt_r1
    w = 1.0 - u - v

    tri = mesh.vertices[mesh.faces[face_idx]]  # (n, 3 corners, 3)
    return u[:, None] * tri[:, 0] + v[:, None] * tri[:, 1] + w[:, None] * tri[:, 2]


def normalize_unit_sphere(points) -> np.ndarray:
    """Center a cloud at its centroid and scale it into the unit sphere.

    The scale divisor is the maximum point norm after centering, so the
    farthest point lands exactly on the sphere. A cloud whose points are all
    identical has no scale; it maps to all zeros.
    """
    pts = as_pointcloud(points)
    centered = pts - pts.mean(axis=0)
    radius = np.linalg.norm(centered, axis=1).max()
    if radius == 0.0:
        return centered
    return centered / radius


def rotate_z(points, angle: float) -> np.ndarray:
    """Rotate a cloud about the +z axis by `angle` radians (right-handed)."""
    pts = as_pointcloud(points)
    angle = float(angle)
    if not np.isfinite(angle):
        raise ValidationError("rotation angle must be finite")
    c, s = np.cos(angle), np.sin(angle)
    out = np.empty_like(pts)
    out[:, 0] = c * pts[:, 0] - s * pts[:, 1]
    out[:, 1] = s * pts[:, 0] + c * pts[:, 1]
    out[:, 2] = pts[:, 2]
    return out


def voxelize(clouds, spec: GridSpec = GridSpec()) -> OccupancyHistogram:
    """Accumulate points from one or more clouds into per-cell counts.

    Cell index along each axis is floor((p - lower) / cell_size), clipped to
    [0, resolution - 1]; a point exactly on an interior cell boundary thus
    belongs to the higher-index cell, and a point on the upper grid face to
    the last cell. Points strictly outside the cube are clamped onto the
    nearest boundary cell and tallied in `clamped`.

    Args:
        clouds: a single (N, 3) array or a sequence of them; at least one
            point in total.
        spec: grid geometry.

    Returns:
        OccupancyHistogram with flattened counts, linearized as
        (ix * res + iy) * res + iz.
    """
    if isinstance(clouds, np.ndarray) and clouds.ndim == 2:
        clouds = [clouds]
    arrays = [as_pointcloud(c) for c in clouds]
    if not arrays:
        raise EmptyInputError("voxelize requires at least one cloud")
    pts = np.concatenate(arrays, axis=0)

    res = spec.resolution
    lower = spec.lower
    upper = spec.upper
    outside = np.any((pts < lower) | (pts > upper), axis=1)
    clamped = int(np.count_nonzero(outside))

    idx = np.floor((pts - lower) / spec.cell_size).astype(np.int64)
    np.clip(idx, 0, res - 1, out=idx)
    linear = (idx[:, 0] * res + idx[:, 1]) * res + idx[:, 2]
    counts = np.bincount(linear, minlength=res**3)
    return OccupancyHistogram(spec=spec, counts=counts, clamped=clamped)
