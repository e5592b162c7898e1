"""Symmetric positive-definite shape matrices and the sphericity statistic."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DimensionMismatch, NotPositiveDefinite, NotSymmetric, ParseError, ValidationError

SYMMETRY_RTOL = 1e-10
PD_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class ShapeMatrix:
    """Immutable SPD matrix with eagerly computed spectral caches.

    Build instances through :func:`make_shape`; the constructor trusts its
    arguments.  Eigenvalues are stored in descending order.
    """

    entries: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    sqrt_factor: np.ndarray
    inv_sqrt_factor: np.ndarray
    inverse: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def lambda_min(self) -> float:
        return float(self.eigvals[-1])

    @property
    def lambda_max(self) -> float:
        return float(self.eigvals[0])

    @property
    def condition_number(self) -> float:
        return self.lambda_max / self.lambda_min

    def scaled(self, c: float) -> "ShapeMatrix":
        if not c > 0:
            raise ValidationError("scale factor must be positive")
        return make_shape(c * self.entries)

    def inverted(self) -> "ShapeMatrix":
        return make_shape(self.inverse)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __repr__(self):
        return f"ShapeMatrix(dim={self.dim}, eigvals={np.array2string(self.eigvals, precision=4)})"


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def make_shape(entries) -> ShapeMatrix:
    """Validate, symmetrize and factor a symmetric positive-definite matrix.

    Raises
    ------
    NotSymmetric
        If ``max|A - A^T|`` exceeds ``1e-10 * max|A|``.
    NotPositiveDefinite
        If the smallest eigenvalue is at most ``1e-12`` times the largest.
    """
    a = np.array(entries, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValidationError(f"shape matrix must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("shape matrix has non-finite entries")
    scale = np.max(np.abs(a))
    if np.max(np.abs(a - a.T)) > SYMMETRY_RTOL * scale:
        raise NotSymmetric("matrix is not symmetric")
    a = 0.5 * (a + a.T)

    w, v = np.linalg.eigh(a)
    w, v = w[::-1], v[:, ::-1]
    if not w[-1] > PD_RTOL * max(w[0], 0.0) or not w[0] > 0:
        raise NotPositiveDefinite(f"smallest eigenvalue {w[-1]:.3e} not positive relative to {w[0]:.3e}")

    def _fn(vals):
        m = (v * vals) @ v.T
        return 0.5 * (m + m.T)

    return ShapeMatrix(
        entries=_readonly(a),
        eigvals=_readonly(w),
        eigvecs=_readonly(v),
        sqrt_factor=_readonly(_fn(np.sqrt(w))),
        inv_sqrt_factor=_readonly(_fn(1.0 / np.sqrt(w))),
        inverse=_readonly(_fn(1.0 / w)),
    )


def identity(p: int) -> ShapeMatrix:
    return make_shape(np.eye(p))


def as_shape(a) -> ShapeMatrix:
    return a if isinstance(a, ShapeMatrix) else make_shape(a)


@dataclass(frozen=True)
class SphericityStats:
    cos_phi0: float
    kappa: float
    lambda_min: float


def sphericity(shape: ShapeMatrix) -> SphericityStats:
    """Sphericity of ``shape`` read as the true shape matrix.

    ``cos_phi0 = Tr(W) / (sqrt(p) ||W||_F)`` with ``W`` the inverse; it is 1
    exactly for scaled identities and never below ``1 / kappa``.
    """
    shape = as_shape(shape)
    # eigenvalues of the inverse, rescaled so the largest is 1; ratio is scale-free
    inv = shape.eigvals[-1] / shape.eigvals
    if np.all(shape.eigvals == shape.eigvals[0]):
        cos_phi0 = 1.0
    else:
        cos_phi0 = float(np.sum(inv) / (math.sqrt(shape.dim) * np.linalg.norm(inv)))
        cos_phi0 = min(cos_phi0, 1.0)
    return SphericityStats(cos_phi0=cos_phi0, kappa=shape.condition_number, lambda_min=shape.lambda_min)


def frobenius_distance_of_inverses(a: ShapeMatrix, b: ShapeMatrix) -> float:
    """``||a^-1 - b^-1||_F``."""
    a, b = as_shape(a), as_shape(b)
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimensions differ: {a.dim} vs {b.dim}")
    return float(np.linalg.norm(a.inverse - b.inverse))


# -- dense CSV and shape tokens ------------------------------------------------

def read_matrix_csv(path) -> np.ndarray:
    """Read a headerless dense CSV of decimals into a 2-D array.

    Blank lines are skipped.  Ragged rows and unparsable cells raise
    :class:`ParseError` carrying 1-based row and column numbers.
    """
    rows = []
    width = None
    with open(path, newline="") as fh:
        for i, line in enumerate(csv.reader(fh), start=1):
            if not line or all(not c.strip() for c in line):
                continue
            vals = []
            for j, cell in enumerate(line, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(f"{path}: row {i}, column {j}: cannot parse {cell!r}", row=i, column=j) from None
                if not math.isfinite(vals[-1]):
                    raise ParseError(f"{path}: row {i}, column {j}: non-finite value", row=i, column=j)
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ParseError(f"{path}: row {i} has {len(vals)} columns, expected {width}", row=i)
            rows.append(vals)
    if not rows:
        raise ParseError(f"{path}: no data")
    return np.array(rows, dtype=float)


def format_float(x: float) -> str:
    return "%.17g" % x


def write_matrix_csv(path, a) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    with open(path, "w", newline="") as fh:
        for row in a:
            fh.write(",".join(format_float(x) for x in row) + "\n")


def parse_shape_spec(spec: str, p: int | None = None) -> ShapeMatrix:
    """Resolve ``identity``, ``diag:v1,v2,...`` or ``file:<path>`` to a shape.

    ``identity`` needs ``p``; for the other forms ``p`` is optional and only
    checked when given.
    """
    spec = spec.strip()
    if spec == "identity":
        if p is None:
            raise ValidationError("'identity' shape needs the dimension p")
        shape = identity(p)
    elif spec.startswith("diag:"):
        try:
            vals = [float(v) for v in spec[5:].split(",") if v.strip()]
        except ValueError:
            raise ValidationError(f"bad diagonal in shape spec {spec!r}") from None
        if not vals:
            raise ValidationError("empty diagonal in shape spec")
        shape = make_shape(np.diag(vals))
    elif spec.startswith("file:"):
        shape = make_shape(read_matrix_csv(Path(spec[5:])))
    else:
        raise ValidationError(f"unknown shape spec {spec!r}; use identity, diag:... or file:...")
    if p is not None and shape.dim != p:
        raise DimensionMismatch(f"shape spec has dimension {shape.dim}, expected p={p}")
    return shape
