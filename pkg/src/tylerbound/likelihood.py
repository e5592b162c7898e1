"""ACG negative log-likelihood in the inverse shape ``W``, its derivatives
as forms over symmetric directions, and moments of quadratic-form ratios.

Pointwise forms accept a single unit vector (returning a float) or a 2-D
array of unit rows (returning one value per row).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import OddOrder, QuadFormUnderflow, UnsupportedOrder, ValidationError
from .sampling import SampleSet, SeededStream, _unit_rows, acg_raw
from .shape import ShapeMatrix, as_shape, identity

QUAD_FLOOR = 1e-300
UNIT_ATOL = 1e-10


@dataclass(frozen=True, eq=False)
class PerturbationDirection:
    U: np.ndarray
    traceless: bool = False

    def __post_init__(self):
        u = np.array(self.U, dtype=float)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise ValidationError(f"direction must be a square matrix, got shape {u.shape}")
        scale = np.max(np.abs(u)) if u.size else 0.0
        if np.max(np.abs(u - u.T)) > 1e-12 * max(scale, 1e-300):
            raise ValidationError("direction must be symmetric")
        u = 0.5 * (u + u.T)
        if self.traceless and abs(np.trace(u)) > 1e-12 * np.linalg.norm(u):
            raise ValidationError("direction flagged traceless has nonzero trace")
        u.setflags(write=False)
        object.__setattr__(self, "U", u)

    @property
    def dim(self) -> int:
        return self.U.shape[0]


def as_direction(u) -> PerturbationDirection:
    if isinstance(u, PerturbationDirection):
        return u
    if isinstance(u, ShapeMatrix):
        return PerturbationDirection(u.entries)
    return PerturbationDirection(u)


def random_direction(p: int, rng: np.random.Generator, traceless: bool = False, normalize: bool = True):
    """Symmetric Gaussian direction, optionally projected onto ``Tr U = 0``."""
    a = rng.standard_normal((p, p))
    u = (a + a.T) / 2.0
    if traceless:
        u -= np.trace(u) / p * np.eye(p)
    if normalize:
        u /= np.linalg.norm(u)
    return PerturbationDirection(u, traceless=traceless)


def _omega(omega) -> ShapeMatrix:
    return as_shape(omega)


def _rows(x, p):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[-1] != p:
        raise ValidationError(f"vector dimension {X.shape[-1]} does not match p={p}")
    if np.any(np.abs(np.linalg.norm(X, axis=1) - 1.0) > UNIT_ATOL):
        raise ValidationError("samples must be unit vectors")
    return X, single


def _quad(X, M):
    return np.einsum("ij,jk,ik->i", X, M, X)


def _omega_quad(X, omega):
    q = _quad(X, omega.entries)
    if np.any(~(q >= QUAD_FLOOR)):
        raise QuadFormUnderflow("x^T W x underflows")
    return q


def _out(v, single):
    return float(v[0]) if single else v


def neg_loglik(omega: ShapeMatrix, x) -> float:
    """``-log|W| + p log(x^T W x)``; invariant under ``W -> cW``."""
    omega = _omega(omega)
    X, single = _rows(x, omega.dim)
    logdet = float(np.sum(np.log(omega.eigvals)))
    return _out(-logdet + omega.dim * np.log(_omega_quad(X, omega)), single)


def grad_form(omega: ShapeMatrix, u, x) -> float:
    """Directional derivative ``-Tr(W^-1 U) + p (x^T U x)/(x^T W x)``."""
    omega, u = _omega(omega), as_direction(u)
    X, single = _rows(x, omega.dim)
    ratio = _quad(X, u.U) / _omega_quad(X, omega)
    return _out(-np.sum(omega.inverse * u.U) + omega.dim * ratio, single)


def hessian_form(omega: ShapeMatrix, u, x) -> float:
    """Second directional derivative ``Tr(W^-1 U W^-1 U) - p ((x^T U x)/(x^T W x))^2``."""
    omega, u = _omega(omega), as_direction(u)
    X, single = _rows(x, omega.dim)
    ratio = _quad(X, u.U) / _omega_quad(X, omega)
    a = omega.inverse @ u.U
    return _out(np.sum(a * a.T) - omega.dim * ratio**2, single)


_FORMS = {"neg_loglik": neg_loglik, "grad_form": grad_form, "hessian_form": hessian_form}


def sample_avg(form, omega, u, samples: SampleSet) -> float:
    """Mean of a pointwise form over all sample rows.

    ``form`` is one of the three form functions or its name; ``u`` is
    ignored for :func:`neg_loglik`.
    """
    if isinstance(form, str):
        try:
            form = _FORMS[form]
        except KeyError:
            raise ValidationError(f"unknown form {form!r}") from None
    if form not in _FORMS.values():
        raise ValidationError("form must be neg_loglik, grad_form or hessian_form")
    rows = samples.rows if isinstance(samples, SampleSet) else np.atleast_2d(samples)
    if rows.shape[0] < 1:
        raise ValidationError("need at least one sample")
    vals = form(omega, rows) if form is neg_loglik else form(omega, u, rows)
    return float(np.mean(vals))


def expected_hessian_at_truth(theta0: ShapeMatrix, u) -> float:
    """Closed-form expected Hessian at ``W0 = theta0^-1``.

    ``(p Tr((theta0 U)^2) - Tr(theta0 U)^2) / (p + 2)``; vanishes along ``W0``.
    """
    theta0, u = as_shape(theta0), as_direction(u)
    p = theta0.dim
    a = theta0.entries @ u.U
    return float((p * np.sum(a * a.T) - np.trace(a) ** 2) / (p + 2))


# -- moments R^nu(U, W; theta0) = E[((x^T U x)/(x^T W x))^nu] --------------------

@dataclass(frozen=True, eq=False)
class MomentSpec:
    """Moment order, numerator direction and denominator matrix ``W = I + D``.

    ``epsilon`` is the spectral norm of ``D``; ``alpha`` is the path
    parameter of the Taylor expansion that the sandwich bound is used in.
    """

    nu: int
    U: np.ndarray
    Omega: Optional[ShapeMatrix] = None
    alpha: float = 1.0
    epsilon: float = field(init=False)

    def __post_init__(self):
        if int(self.nu) != self.nu or self.nu < 1:
            raise ValidationError("moment order must be a positive integer")
        u = as_direction(self.U).U
        omega = identity(u.shape[0]) if self.Omega is None else as_shape(self.Omega)
        if omega.dim != u.shape[0]:
            raise ValidationError("U and Omega dimensions differ")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError("alpha must lie in [0, 1]")
        object.__setattr__(self, "nu", int(self.nu))
        object.__setattr__(self, "U", u)
        object.__setattr__(self, "Omega", omega)
        eps = float(np.linalg.norm(omega.entries - np.eye(omega.dim), 2))
        object.__setattr__(self, "epsilon", eps)

    def sandwich(self, base: float) -> tuple[float, float]:
        """Interval ``[base/(1+eps)^nu, base/(1-eps)^nu]`` for ``base = R^nu(U, I; I)``.

        Valid for positive semi-definite ``U``; the lower end assumes the ratio is nonnegative.
        """
        if not self.epsilon < 1:
            raise ValidationError("sandwich bounds need epsilon < 1")
        lo, hi = base / (1 + self.epsilon) ** self.nu, base / (1 - self.epsilon) ** self.nu
        return (min(lo, hi), max(lo, hi))


def _is_identity(m: ShapeMatrix) -> bool:
    return bool(np.array_equal(m.entries, np.eye(m.dim)))


def moment_r(spec: MomentSpec, theta0: Optional[ShapeMatrix] = None) -> float:
    """Closed-form ``R^nu(U, I; I)`` for ``nu`` in 1, 2, 3 on the uniform sphere."""
    theta0 = identity(spec.U.shape[0]) if theta0 is None else as_shape(theta0)
    if not (_is_identity(spec.Omega) and _is_identity(theta0)):
        raise ValidationError("closed-form moments exist only for Omega = I and theta0 = I; use moment_mc_oracle")
    u = spec.U
    p = u.shape[0]
    t1 = np.trace(u)
    if spec.nu == 1:
        return float(t1 / p)
    u2 = u @ u
    t2 = np.trace(u2)
    if spec.nu == 2:
        return float((t1**2 + 2 * t2) / (p * (p + 2)))
    if spec.nu == 3:
        t3 = np.sum(u2 * u.T)
        return float((t1**3 + 6 * t1 * t2 + 8 * t3) / (p * (p + 2) * (p + 4)))
    raise UnsupportedOrder(f"no closed form for nu={spec.nu}; use moment_mc_oracle")


def moment_even_bound(nu: int, u, p: int) -> float:
    """Upper bound ``(nu/2)! ||U||_F^nu / p^(nu/2)`` on ``R^nu(U, I; I)``, even ``nu``."""
    if int(nu) != nu or nu < 2 or nu % 2:
        raise OddOrder(f"moment bound needs an even order >= 2, got {nu}")
    fro = float(np.linalg.norm(as_direction(u).U))
    return math.factorial(nu // 2) * fro**nu / p ** (nu / 2)


def moment_mc_oracle(
    spec: MomentSpec,
    theta0: ShapeMatrix,
    n_mc: int,
    stream: SeededStream,
    chunk: int = 1_000_000,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the ratio moment under ACG(theta0)."""
    theta0 = as_shape(theta0)
    if n_mc < 1000:
        raise ValidationError("n_mc must be at least 1000")
    if theta0.dim != spec.U.shape[0]:
        raise ValidationError("theta0 dimension does not match U")
    rng = stream.generator()
    n_done, mean, m2 = 0, 0.0, 0.0
    while n_done < n_mc:
        m = min(chunk, n_mc - n_done)
        X = _unit_rows(acg_raw(theta0, m, rng))
        den = _quad(X, spec.Omega.entries)
        if np.any(~(den >= QUAD_FLOOR)):
            raise QuadFormUnderflow("x^T W x underflows")
        r = (_quad(X, spec.U) / den) ** spec.nu
        # Chan's pairwise merge of (count, mean, M2)
        c_mean = float(np.mean(r))
        c_m2 = float(np.sum((r - c_mean) ** 2))
        tot = n_done + m
        delta = c_mean - mean
        mean += delta * m / tot
        m2 += c_m2 + delta * delta * n_done * m / tot
        n_done = tot
    return mean, math.sqrt(m2 / (n_mc - 1) / n_mc)
