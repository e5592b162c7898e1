"""Tyler's fixed-point shape estimator, a trace-normalized SCM baseline, and
scikit-learn style estimator wrappers around both."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import NotConverged, NotEnoughSamples, NotPositiveDefinite, QuadFormUnderflow, SingularSCM, ValidationError
from .likelihood import QUAD_FLOOR, neg_loglik
from .sampling import SampleSet, normalize_rows
from .shape import ShapeMatrix, as_shape, make_shape


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-12
    max_iter: int = 1000
    trace_target: Optional[float] = None  # None means p

    def __post_init__(self):
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValidationError("max_iter must be a positive integer")
        if self.trace_target is not None and not self.trace_target > 0:
            raise ValidationError("trace_target must be positive")


@dataclass(frozen=True)
class EstimatorResult:
    T: ShapeMatrix
    iterations: int
    residual: float
    converged: bool
    trace_target: float
    residuals: list = field(default_factory=list, repr=False)


def _as_samples(samples) -> SampleSet:
    return samples if isinstance(samples, SampleSet) else normalize_rows(samples)


def _tyler_map(chol, X):
    """Right-hand side ``(p/n) sum x x^T / (x^T T^-1 x)`` given ``chol(T)``."""
    n, p = X.shape
    y = linalg.solve_triangular(chol, X.T, lower=True, check_finite=False)
    q = np.einsum("ij,ij->j", y, y)
    if np.any(~(q >= QUAD_FLOOR)):
        raise QuadFormUnderflow("x^T T^-1 x underflows")
    F = (X.T * (p / (n * q))) @ X
    return 0.5 * (F + F.T)


def _cholesky(a):
    try:
        c = linalg.cholesky(a, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError):
        return None
    d = np.diag(c)
    if not np.all(d > 0) or d.min() <= 1e-8 * d.max():
        return None
    return c


def _inv_trace(chol):
    p = chol.shape[0]
    ci = linalg.solve_triangular(chol, np.eye(p), lower=True, check_finite=False)
    return float(np.sum(ci * ci))


def tyler_estimate(
    samples,
    config: SolverConfig = SolverConfig(),
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> EstimatorResult:
    """Solve Tyler's fixed-point equation and fix the scale of ``T^-1``.

    Starts from the identity, rescales every iterate to ``Tr(T^-1) = p`` and
    stops once the relative fixed-point residual is at most ``config.tol``.
    The converged matrix is rescaled so ``Tr(T^-1) = trace_target``.

    ``callback(k, T_k)`` is called with each scale-normalized iterate before
    its residual is tested.

    Raises
    ------
    NotEnoughSamples
        If ``n <= p``.
    NotConverged
        If ``max_iter`` is exhausted or an iterate loses positive
        definiteness, the usual sign that the samples concentrate on a
        subspace and the estimator does not exist.
    """
    samples = _as_samples(samples)
    X = samples.rows
    n, p = X.shape
    if n <= p:
        raise NotEnoughSamples(f"Tyler's estimator needs n > p, got n={n}, p={p}")
    target = float(p if config.trace_target is None else config.trace_target)

    T = np.eye(p)
    chol = np.eye(p)
    residuals = []
    for k in range(config.max_iter):
        if callback is not None:
            callback(k, T)
        F = _tyler_map(chol, X)
        res = float(np.linalg.norm(T - F) / np.linalg.norm(T))
        residuals.append(res)
        if res <= config.tol:
            break
        chol_f = _cholesky(F)
        if chol_f is None:
            raise NotConverged(f"iterate {k + 1} is singular; samples may lie on a subspace", residuals)
        c = _inv_trace(chol_f) / p
        T = c * F
        chol = math.sqrt(c) * chol_f
    else:
        raise NotConverged(f"no convergence in {config.max_iter} iterations (residual {residuals[-1]:.3e})", residuals)

    T = T * (_inv_trace(chol) / target)
    try:
        shape = make_shape(T)
    except NotPositiveDefinite:
        raise NotConverged("converged matrix is numerically singular", residuals) from None
    return EstimatorResult(
        T=shape,
        iterations=len(residuals),
        residual=residuals[-1],
        converged=True,
        trace_target=target,
        residuals=residuals,
    )


def fixed_point_residual(T: ShapeMatrix, samples) -> float:
    """``||T - (p/n) sum x x^T / (x^T T^-1 x)||_F / ||T||_F``."""
    T = as_shape(T)
    samples = _as_samples(samples)
    X = samples.rows
    n, p = X.shape
    if p != T.dim:
        raise ValidationError(f"samples have p={p}, matrix has dimension {T.dim}")
    q = np.einsum("ij,jk,ik->i", X, T.inverse, X)
    if np.any(~(q >= QUAD_FLOOR)):
        raise QuadFormUnderflow("x^T T^-1 x underflows")
    F = (X.T * (p / (n * q))) @ X
    return float(np.linalg.norm(T.entries - F) / np.linalg.norm(T.entries))


def scm_estimate(samples, trace_target: Optional[float] = None) -> ShapeMatrix:
    """Second-moment matrix ``(1/n) sum x x^T`` rescaled to ``Tr(S^-1) = trace_target``.

    A :class:`SampleSet` contributes its raw vectors when it has them (the
    Gaussian-MLE baseline), otherwise its unit rows.  Plain arrays are used
    as given.
    """
    if isinstance(samples, SampleSet):
        X = samples.raw if samples.raw is not None else samples.rows
    else:
        X = np.atleast_2d(np.asarray(samples, dtype=float))
    n, p = X.shape
    if n <= p:
        raise NotEnoughSamples(f"SCM needs n > p, got n={n}, p={p}")
    target = float(p if trace_target is None else trace_target)
    if not target > 0:
        raise ValidationError("trace_target must be positive")
    # scale rows to unit max magnitude first so huge heavy-tailed values cannot overflow
    s = np.max(np.abs(X))
    S = (X / s).T @ (X / s) / n
    try:
        shape = make_shape(0.5 * (S + S.T))
    except NotPositiveDefinite:
        raise SingularSCM("sample second-moment matrix is singular") from None
    tr_inv = float(np.sum(1.0 / shape.eigvals))
    return make_shape(shape.entries * (tr_inv / target))


# -- scikit-learn interface -----------------------------------------------------

class TylerShape(TransformerMixin, BaseEstimator):
    """Tyler's M-estimator of the shape matrix.

    Rows of ``X`` are projected onto the unit sphere before fitting, so any
    per-sample positive scaling leaves the fit unchanged.

    Parameters
    ----------
    tol : float, default=1e-12
        Relative fixed-point residual at which iteration stops.
    max_iter : int, default=1000
        Iteration cap.
    trace_target : float or None, default=None
        Required ``Tr(shape_^-1)``; ``None`` means the dimension ``p``.

    Attributes
    ----------
    shape_ : ndarray of shape (n_features, n_features)
        Estimated shape matrix ``T``.
    precision_ : ndarray of shape (n_features, n_features)
        ``T^-1``.
    n_iter_ : int
    residual_ : float
    result_ : EstimatorResult
    """

    def __init__(self, tol=1e-12, max_iter=1000, trace_target=None):
        self.tol = tol
        self.max_iter = max_iter
        self.trace_target = trace_target

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=2)
        cfg = SolverConfig(tol=self.tol, max_iter=self.max_iter, trace_target=self.trace_target)
        self.result_ = tyler_estimate(normalize_rows(X), cfg)
        self.shape_ = np.array(self.result_.T.entries)
        self.precision_ = np.array(self.result_.T.inverse)
        self.n_iter_ = self.result_.iterations
        self.residual_ = self.result_.residual
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        """Whiten by ``T^-1/2`` and project back onto the sphere."""
        check_is_fitted(self, "result_")
        X = check_array(X, dtype=np.float64)
        Z = normalize_rows(X).rows @ self.result_.T.inv_sqrt_factor
        return Z / np.linalg.norm(Z, axis=1, keepdims=True)

    def mahalanobis(self, X):
        """``x^T T^-1 x`` for each raw row."""
        check_is_fitted(self, "result_")
        X = check_array(X, dtype=np.float64)
        return np.einsum("ij,jk,ik->i", X, self.precision_, X)

    def score(self, X, y=None):
        """Mean ACG log-likelihood (up to a constant) of the normalized rows."""
        check_is_fitted(self, "result_")
        X = check_array(X, dtype=np.float64)
        return -float(np.mean(neg_loglik(self.result_.T.inverted(), normalize_rows(X).rows)))


class SampleShape(BaseEstimator):
    """Sample second-moment baseline rescaled to a fixed ``Tr(shape_^-1)``."""

    def __init__(self, trace_target=None):
        self.trace_target = trace_target

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=2)
        shape = scm_estimate(X, self.trace_target)
        self.shape_ = np.array(shape.entries)
        self.precision_ = np.array(shape.inverse)
        self.n_features_in_ = X.shape[1]
        return self
