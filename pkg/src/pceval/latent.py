"""Latent-code algebra and decoder adapters.

Latent codes are float64 vectors; codebooks are (R, k) arrays of codes.
Decoders turn batches of codes into point clouds: a toy linear decoder for
self-contained pipelines and tests, and an adapter that shells out to an
arbitrary external decoder process.
"""

from __future__ import annotations

import subprocess
import tempfile
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import DecoderFailureError, EmptyInputError, ValidationError


def _as_code(vec, label: str = "code") -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise ValidationError(f"{label} must be a non-empty vector, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{label} contains non-finite values")
    return arr


def _as_codebook(codes, label: str = "codes") -> np.ndarray:
    arr = np.asarray(codes, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValidationError(f"{label} must be a non-empty (R, k) array, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{label} contains non-finite values")
    return arr


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise ValidationError(
            f"latent dimensions differ: {a.shape[-1]} vs {b.shape[-1]}"
        )


def interpolate(code_a, code_b, t: float) -> np.ndarray:
    """Linear interpolation (1 - t) * a + t * b for t in [0, 1]."""
    a = _as_code(code_a, "code_a")
    b = _as_code(code_b, "code_b")
    _check_same_dim(a, b)
    t = float(t)
    if not (0.0 <= t <= 1.0):
        raise ValidationError(f"t must lie in [0, 1], got {t}")
    return (1.0 - t) * a + t * b


def attribute_vector(group_a, group_b, use_sum: bool = False) -> np.ndarray:
    """Edit direction from group A toward group B.

    Default is the difference of the group means; use_sum=True uses the
    difference of the group sums instead (scales with group size, which
    matters when the groups are unbalanced).
    """
    a = _as_codebook(group_a, "group_a")
    b = _as_codebook(group_b, "group_b")
    _check_same_dim(a, b)
    if use_sum:
        return b.sum(axis=0) - a.sum(axis=0)
    return b.mean(axis=0) - a.mean(axis=0)


def apply_edit(code, edit) -> np.ndarray:
    """Add an edit vector to a code."""
    c = _as_code(code, "code")
    e = _as_code(edit, "edit")
    _check_same_dim(c, e)
    return c + e


def analogy(code_a, code_a_prime, code_b, codebook):
    """Complete the analogy a : a' :: b : ? inside a codebook.

    The target b + (a' - a) is snapped to its nearest codebook row by
    Euclidean distance (ties to the smallest index).

    Returns:
        (index, code) where code is a copy of the matched codebook row.
    """
    a = _as_code(code_a, "code_a")
    ap = _as_code(code_a_prime, "code_a_prime")
    b = _as_code(code_b, "code_b")
    book = _as_codebook(codebook, "codebook")
    for other in (ap, b, book):
        _check_same_dim(a, other)
    target = b + (ap - a)
    d2 = np.square(book - target).sum(axis=1)
    idx = int(d2.argmin())
    return idx, book[idx].copy()


class DecoderAdapter(Protocol):
    """Anything that maps an (R, k) code batch to R point clouds."""

    def decode(self, codes: np.ndarray) -> list[np.ndarray]: ...


class ToyLinearDecoder:
    """Deterministic affine decoder for end-to-end pipelines without a
    neural network: cloud(z) = template + reshape(W @ z).

    template is (N, 3); weights is (3N, k). The offsets are reshaped row
    major, so weight row 3*i + d moves coordinate d of template point i.
    """

    def __init__(self, template: np.ndarray, weights: np.ndarray):
        template = np.asarray(template, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        if template.ndim != 2 or template.shape[1] != 3 or template.shape[0] == 0:
            raise ValidationError(f"template must be (N, 3), got {template.shape}")
        if weights.ndim != 2 or weights.shape[0] != 3 * template.shape[0]:
            raise ValidationError(
                f"weights must be (3N, k) with N={template.shape[0]}, got {weights.shape}"
            )
        if not (np.isfinite(template).all() and np.isfinite(weights).all()):
            raise ValidationError("decoder parameters contain non-finite values")
        self.template = template
        self.weights = weights

    @property
    def latent_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def points_per_cloud(self) -> int:
        return self.template.shape[0]

    def decode(self, codes: np.ndarray) -> list[np.ndarray]:
        book = _as_codebook(codes)
        if book.shape[1] != self.latent_dim:
            raise ValidationError(
                f"codes have dim {book.shape[1]}, decoder expects {self.latent_dim}"
            )
        offsets = (book @ self.weights.T).reshape(book.shape[0], -1, 3)
        return [self.template + off for off in offsets]

    def save(self, path) -> None:
        np.savez(path, template=self.template, weights=self.weights)

    @classmethod
    def load(cls, path) -> "ToyLinearDecoder":
        with np.load(path) as data:
            return cls(template=data["template"], weights=data["weights"])


class ExternalProcessDecoder:
    """Decoder that shells out to a subprocess.

    The command is invoked as `command + [codes_path, clouds_path]`; it must
    read a latent-code file at codes_path and write a point-cloud-set file
    at clouds_path with exactly one cloud per input code. Nonzero exit,
    unreadable output, or a cloud-count mismatch raise DecoderFailureError
    with captured stdout/stderr attached.
    """

    def __init__(self, command: Sequence[str], timeout: float | None = None):
        self.command = [str(c) for c in command]
        if not self.command:
            raise ValidationError("decoder command must be non-empty")
        self.timeout = timeout

    def decode(self, codes: np.ndarray) -> list[np.ndarray]:
        from . import formats  # local import: formats has no latent dependency

        book = _as_codebook(codes)
        with tempfile.TemporaryDirectory(prefix="pceval-decode-") as tmp:
            in_path = Path(tmp) / "codes.latc"
            out_path = Path(tmp) / "clouds.pcset"
            formats.write_latc(in_path, book)
            try:
                proc = subprocess.run(
                    self.command + [str(in_path), str(out_path)],
                    capture_output=True,
                    text=True,
                    timeout=self.timeout,
                )
            except (OSError, subprocess.TimeoutExpired) as exc:
                raise DecoderFailureError(
                    f"decoder process failed to run: {exc}", diagnostics=str(exc)
                ) from exc
            diagnostics = f"stdout:\n{proc.stdout}\nstderr:\n{proc.stderr}"
            if proc.returncode != 0:
                raise DecoderFailureError(
                    f"decoder exited with status {proc.returncode}", diagnostics=diagnostics
                )
            try:
                clouds = formats.read_pcset(out_path)
            except Exception as exc:
                raise DecoderFailureError(
                    f"decoder produced unreadable output: {exc}", diagnostics=diagnostics
                ) from exc
            if len(clouds) != book.shape[0]:
                raise DecoderFailureError(
                    f"decoder returned {len(clouds)} clouds for {book.shape[0]} codes",
                    diagnostics=diagnostics,
                )
            return clouds


def decode(codes, adapter: DecoderAdapter) -> list[np.ndarray]:
    """Decode a batch of latent codes into point clouds."""
    book = _as_codebook(codes)
    if book.shape[0] == 0:
        raise EmptyInputError("no codes to decode")
    return adapter.decode(book)
