"""File formats: binary cloud sets, latent codes, voxel grids, and the
ASCII conveniences (XYZ clouds, run-length voxel text, OFF meshes).

All binary formats are little-endian with an 8-byte magic. Coordinates are
stored as float32; readers return float64 (the package compute dtype), and
because float32 -> float64 -> float32 is lossless, write(read(file)) is
byte-identical to the original file.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .geometry import BinaryVoxelGrid, GridSpec, TriangleMesh, as_pointcloud

PCSET_MAGIC = b"PCSET1\x00\x00"
LATC_MAGIC = b"LATC1\x00\x00\x00"
VOXG_MAGIC = b"VOXG1\x00\x00\x00"

_U32 = np.dtype("<u4")
_F32 = np.dtype("<f4")


class _Reader:
    """Cursor over a byte buffer with truncation checking."""

    def __init__(self, data: bytes, label: str):
        self.data = data
        self.off = 0
        self.label = label

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise FormatError(f"{self.label}: truncated file")
        chunk = self.data[self.off : self.off + n]
        self.off += n
        return chunk

    def u32(self) -> int:
        return int(np.frombuffer(self.take(4), dtype=_U32)[0])

    def f32(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype=_F32).astype(np.float64)

    def done(self) -> None:
        if self.off != len(self.data):
            raise FormatError(f"{self.label}: {len(self.data) - self.off} trailing bytes")


def _read_file(path) -> bytes:
    return Path(path).read_bytes()


def _check_magic(reader: _Reader, magic: bytes) -> None:
    if reader.take(len(magic)) != magic:
        raise FormatError(f"{reader.label}: bad magic, not a {magic[:5].decode()} file")


def write_pcset(path, clouds) -> None:
    """Write a sequence of point clouds (float32 on disk)."""
    arrays = [as_pointcloud(c) for c in clouds]
    parts = [PCSET_MAGIC, np.array([len(arrays)], dtype=_U32).tobytes()]
    for arr in arrays:
        parts.append(np.array([arr.shape[0]], dtype=_U32).tobytes())
        parts.append(np.ascontiguousarray(arr, dtype=_F32).tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_pcset(path) -> list[np.ndarray]:
    """Read a point-cloud set; returns float64 (N, 3) arrays."""
    r = _Reader(_read_file(path), str(path))
    _check_magic(r, PCSET_MAGIC)
    count = r.u32()
    clouds = []
    for k in range(count):
        n = r.u32()
        if n == 0:
            raise FormatError(f"{r.label}: cloud {k} has zero points")
        pts = r.f32(3 * n).reshape(n, 3)
        if not np.isfinite(pts).all():
            raise FormatError(f"{r.label}: cloud {k} has non-finite coordinates")
        clouds.append(pts)
    r.done()
    return clouds


def write_latc(path, codes) -> None:
    """Write an (R, k) latent-code matrix (float32 on disk)."""
    arr = np.asarray(codes, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValidationError(f"codes must be a non-empty (R, k) array, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValidationError("codes contain non-finite values")
    header = np.array([arr.shape[0], arr.shape[1]], dtype=_U32).tobytes()
    Path(path).write_bytes(LATC_MAGIC + header + np.ascontiguousarray(arr, dtype=_F32).tobytes())


def read_latc(path) -> np.ndarray:
    """Read a latent-code matrix; returns float64 (R, k)."""
    r = _Reader(_read_file(path), str(path))
    _check_magic(r, LATC_MAGIC)
    rows = r.u32()
    dims = r.u32()
    if rows == 0 or dims == 0:
        raise FormatError(f"{r.label}: empty code matrix")
    codes = r.f32(rows * dims).reshape(rows, dims)
    if not np.isfinite(codes).all():
        raise FormatError(f"{r.label}: non-finite code values")
    r.done()
    return codes


def write_voxg(path, grid: BinaryVoxelGrid) -> None:
    """Write a binary voxel grid (center and per-axis half-widths as
    float32; the cube is stored with three equal half-widths)."""
    spec = grid.spec
    geom = np.array(list(spec.center) + [spec.half_width] * 3, dtype=_F32)
    Path(path).write_bytes(
        VOXG_MAGIC
        + np.array([spec.resolution], dtype=_U32).tobytes()
        + geom.tobytes()
        + grid.occupied.astype(np.uint8).tobytes()
    )


def read_voxg(path) -> BinaryVoxelGrid:
    r = _Reader(_read_file(path), str(path))
    _check_magic(r, VOXG_MAGIC)
    res = r.u32()
    if res == 0:
        raise FormatError(f"{r.label}: zero resolution")
    geom = r.f32(6)
    if not (geom[3] == geom[4] == geom[5]):
        raise FormatError(f"{r.label}: non-cubic grids are not supported")
    if geom[3] <= 0:
        raise FormatError(f"{r.label}: half-width must be positive")
    occ = np.frombuffer(r.take(res**3), dtype=np.uint8)
    if occ.max(initial=0) > 1:
        raise FormatError(f"{r.label}: occupancy bytes must be 0 or 1")
    r.done()
    spec = GridSpec(resolution=res, center=tuple(geom[:3]), half_width=float(geom[3]))
    return BinaryVoxelGrid(spec=spec, occupied=occ.astype(bool))


def write_xyz(path, cloud) -> None:
    """Write one cloud as ASCII, one `x y z` line per point."""
    pts = as_pointcloud(cloud)
    lines = [f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}" for p in pts]
    Path(path).write_text("\n".join(lines) + "\n")


def read_xyz(path) -> np.ndarray:
    """Read an ASCII cloud: one point per line, whitespace separated.
    Blank lines and lines starting with # are skipped."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        fields = body.split()
        if len(fields) != 3:
            raise FormatError(f"{path}: line {lineno}: expected 3 coordinates")
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: no points found")
    pts = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(pts).all():
        raise FormatError(f"{path}: non-finite coordinates")
    return pts


def write_voxel_rle(path, grid: BinaryVoxelGrid) -> None:
    """Write a voxel grid as run-length ASCII: a header line
    `VOXRLE res cx cy cz half_width` followed by `<count>x<bit>` tokens."""
    spec = grid.spec
    bits = grid.occupied.astype(np.int8)
    edges = np.nonzero(np.r_[True, bits[1:] != bits[:-1]])[0]
    lengths = np.diff(np.r_[edges, bits.shape[0]])
    tokens = [f"{ln}x{bits[e]}" for e, ln in zip(edges, lengths)]
    header = (
        f"VOXRLE {spec.resolution} {spec.center[0]!r} {spec.center[1]!r} "
        f"{spec.center[2]!r} {spec.half_width!r}"
    )
    Path(path).write_text(header + "\n" + " ".join(tokens) + "\n")


def read_voxel_rle(path) -> BinaryVoxelGrid:
    """Read run-length voxel text; accepts `<count>x<bit>` runs and bare
    0/1 tokens. Total run length must equal resolution cubed."""
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("#")]
    if not lines:
        raise FormatError(f"{path}: empty file")
    head = lines[0].split()
    if len(head) != 6 or head[0] != "VOXRLE":
        raise FormatError(f"{path}: bad header, expected 'VOXRLE res cx cy cz half_width'")
    try:
        res = int(head[1])
        cx, cy, cz, hw = (float(v) for v in head[2:])
    except ValueError as exc:
        raise FormatError(f"{path}: bad header numbers: {exc}") from exc
    if res < 1 or hw <= 0:
        raise FormatError(f"{path}: resolution and half-width must be positive")

    chunks = []
    for token in " ".join(lines[1:]).split():
        run, sep, bit = token.partition("x")
        if not sep:
            run, bit = "1", token
        try:
            count, value = int(run), int(bit)
        except ValueError as exc:
            raise FormatError(f"{path}: bad token {token!r}") from exc
        if value not in (0, 1) or count < 1:
            raise FormatError(f"{path}: bad token {token!r}")
        chunks.append(np.full(count, bool(value)))
    occ = np.concatenate(chunks) if chunks else np.zeros(0, dtype=bool)
    if occ.shape[0] != res**3:
        raise FormatError(
            f"{path}: runs cover {occ.shape[0]} cells, expected {res**3}"
        )
    spec = GridSpec(resolution=res, center=(cx, cy, cz), half_width=hw)
    return BinaryVoxelGrid(spec=spec, occupied=occ)


def read_off(path) -> TriangleMesh:
    """Read an OFF mesh with triangular faces.

    Handles both the standard two-line header and the squashed single-line
    `OFF V F E` variant. Faces must start with vertex count 3.
    """
    tokens = []
    for line in Path(path).read_text().splitlines():
        body = line.split("#", 1)[0].strip()
        if body:
            tokens.extend(body.split())
    if not tokens:
        raise FormatError(f"{path}: empty file")
    if tokens[0] == "OFF":
        tokens = tokens[1:]
    elif tokens[0].startswith("OFF"):
        tokens = [tokens[0][3:]] + tokens[1:]
    else:
        raise FormatError(f"{path}: missing OFF header")
    try:
        n_vert, n_face = int(tokens[0]), int(tokens[1])
        cursor = 3  # skip the (ignored) edge count
        verts = np.asarray(
            [float(t) for t in tokens[cursor : cursor + 3 * n_vert]], dtype=np.float64
        ).reshape(n_vert, 3)
        cursor += 3 * n_vert
        faces = np.empty((n_face, 3), dtype=np.int64)
        for f in range(n_face):
            arity = int(tokens[cursor])
            if arity != 3:
                raise FormatError(f"{path}: face {f} has {arity} vertices, only triangles supported")
            faces[f] = [int(t) for t in tokens[cursor + 1 : cursor + 4]]
            cursor += 4
    except FormatError:
        raise
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed OFF data: {exc}") from exc
    if cursor != len(tokens):
        raise FormatError(f"{path}: trailing tokens after faces")
    try:
        return TriangleMesh(vertices=verts, faces=faces)
    except ValidationError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def load_clouds(path) -> list[np.ndarray]:
    """Load clouds from a path by extension: .pcset (binary set) or
    .xyz/.txt (single ASCII cloud)."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pcset":
        return read_pcset(path)
    if suffix in (".xyz", ".txt"):
        return [read_xyz(path)]
    raise ValidationError(f"unrecognized cloud file extension: {path}")
