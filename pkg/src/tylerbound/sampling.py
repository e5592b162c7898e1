"""Seeded generators for angular central Gaussian and compound-Gaussian data.

Every generator returns unit-norm rows.  Randomness comes from a Philox
(counter-based) bit generator keyed by ``(master_seed, stream_index)``, so a
trial's samples depend only on its own stream and never on how many other
trials run beside it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import NonPositiveTexture, ValidationError, ZeroSample
from .shape import ShapeMatrix, as_shape, format_float

ZERO_NORM = 1e-300
UNIT_ATOL = 1e-12

MODELS = ("acg", "compound-gaussian", "external")


@dataclass(frozen=True)
class SeededStream:
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValidationError("master_seed must be an unsigned 64-bit integer")
        if self.stream_index < 0:
            raise ValidationError("stream_index must be nonnegative")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence([int(self.master_seed), int(self.stream_index)])
        return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True, eq=False)
class SampleSet:
    """``n`` unit vectors in dimension ``p``, one per row.

    ``raw`` keeps the un-normalized vectors when they are known (generated
    data, or ingested rows); the SCM baseline needs them.
    """

    rows: np.ndarray
    model: str = "external"
    raw: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise ValidationError(f"samples must be a nonempty 2-D array, got shape {rows.shape}")
        if self.model not in MODELS:
            raise ValidationError(f"unknown model tag {self.model!r}")
        norms = np.linalg.norm(rows, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_ATOL)
        if bad.size:
            raise ValidationError(f"row {bad[0]} is not unit-norm (norm {norms[bad[0]]!r})")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        if self.raw is not None:
            raw = np.array(self.raw, dtype=float)
            if raw.shape != rows.shape:
                raise ValidationError("raw vectors must match the sample shape")
            raw.setflags(write=False)
            object.__setattr__(self, "raw", raw)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def p(self) -> int:
        return self.rows.shape[1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            for row in self.rows:
                fh.write(",".join(format_float(x) for x in row) + "\n")


def _unit_rows(raw):
    norms = np.linalg.norm(raw, axis=1)
    small = np.flatnonzero(~(norms >= ZERO_NORM))
    if small.size:
        raise ZeroSample(int(small[0]) + 1)  # 1-based, like ParseError
    return raw / norms[:, None]


def normalize_rows(raw) -> SampleSet:
    """Project each row onto the unit sphere.

    >>> normalize_rows([[3.0, 4.0]]).rows
    array([[0.6, 0.8]])
    """
    raw = np.array(raw, dtype=float)
    if raw.ndim == 1:
        raw = raw[:, None]
    if raw.ndim != 2 or raw.shape[0] < 1:
        raise ValidationError(f"expected an n x p array, got shape {raw.shape}")
    if not np.all(np.isfinite(raw)):
        raise ValidationError("data contains non-finite values")
    return SampleSet(_unit_rows(raw), model="external", raw=raw)


def _check_n(n):
    if int(n) != n or n < 1:
        raise ValidationError(f"sample count must be a positive integer, got {n!r}")
    return int(n)


def sample_acg(shape: ShapeMatrix, n: int, stream: SeededStream) -> SampleSet:
    """Draw ``n`` ACG(shape) vectors as ``S z / ||S z||`` with ``S`` the symmetric root."""
    shape = as_shape(shape)
    n = _check_n(n)
    raw = acg_raw(shape, n, stream.generator())
    return SampleSet(_unit_rows(raw), model="acg", raw=raw)


def acg_raw(shape: ShapeMatrix, n: int, rng: np.random.Generator) -> np.ndarray:
    """Un-normalized Gaussian vectors ``S z`` drawn from ``rng``."""
    return rng.standard_normal((n, shape.dim)) @ shape.sqrt_factor


TextureSampler = Callable[[np.random.Generator, int], np.ndarray]


def sample_compound_gaussian(
    shape: ShapeMatrix, texture_sampler: TextureSampler, n: int, stream: SeededStream
) -> SampleSet:
    """Draw compound-Gaussian vectors ``sqrt(tau_i) S z_i`` and normalize them.

    The stream is consumed in a fixed order: all ``n`` textures first, then
    the ``n x p`` Gaussian block.  A sampler that draws nothing (a constant
    texture) therefore reproduces :func:`sample_acg` bit for bit.
    """
    shape = as_shape(shape)
    n = _check_n(n)
    rng = stream.generator()
    tau = np.asarray(texture_sampler(rng, n), dtype=float).reshape(-1)
    if tau.shape != (n,):
        raise ValidationError(f"texture sampler returned {tau.shape[0]} values, expected {n}")
    if not np.all(tau > 0) or not np.all(np.isfinite(tau)):
        raise NonPositiveTexture("texture values must be finite and strictly positive")
    raw = np.sqrt(tau)[:, None] * (rng.standard_normal((n, shape.dim)) @ shape.sqrt_factor)
    return SampleSet(_unit_rows(raw), model="compound-gaussian", raw=raw)


def constant_texture(value: float = 1.0) -> TextureSampler:
    def sampler(rng, n):
        return np.full(n, float(value))

    return sampler


def inverse_chi2_texture(dof: float = 1.0) -> TextureSampler:
    """Texture ``dof / chi2_dof``, which makes the raw vectors multivariate t."""
    if not dof > 0:
        raise ValidationError("texture degrees of freedom must be positive")

    def sampler(rng, n):
        return dof / rng.chisquare(dof, size=n)

    return sampler


def sample(model: str, shape: ShapeMatrix, n: int, stream: SeededStream, texture_dof: float = 1.0) -> SampleSet:
    """Dispatch on a model tag, as the experiment harness does."""
    if model == "acg":
        return sample_acg(shape, n, stream)
    if model == "compound-gaussian":
        return sample_compound_gaussian(shape, inverse_chi2_texture(texture_dof), n, stream)
    raise ValidationError(f"cannot generate samples for model {model!r}")
