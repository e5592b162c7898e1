"""Non-asymptotic error bounds for Tyler's estimator.

Bernstein tail primitives, the gradient and Hessian concentration tails,
the certified radius for ``||T^-1 - theta0^-1||_F`` and its optimization
over the gradient level ``t`` and Hessian discount ``tau``.

Every probability returned here is clamped to ``[0, 1]``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize

from .exceptions import BelowValidityThreshold, EpsilonTooLarge, NotEnoughSamples, TauOutOfWindow, ValidationError

SQRT2 = math.sqrt(2.0)


def _clamp(x):
    return min(1.0, max(0.0, x))


@dataclass(frozen=True)
class BoundQuery:
    n: int
    p: int
    cos_phi0: float = 1.0
    lambda_min: float = 1.0
    confidence: float = 0.95

    def __post_init__(self):
        if not (int(self.p) == self.p and self.p >= 1):
            raise ValidationError("p must be a positive integer")
        if not (int(self.n) == self.n and self.n > self.p):
            raise NotEnoughSamples(f"need n > p, got n={self.n}, p={self.p}")
        if not 0 < self.cos_phi0 <= 1:
            raise ValidationError("cos_phi0 must lie in (0, 1]")
        if not self.lambda_min > 0:
            raise ValidationError("lambda_min must be positive")
        if not 0 < self.confidence < 1:
            raise ValidationError("confidence must lie in (0, 1)")


@dataclass(frozen=True)
class BoundResult:
    n: int
    p: int
    cos_phi0: float
    lambda_min: float
    confidence: float
    feasible: bool
    radius: float | None
    t_star: float | None
    tau_star: float | None
    theta: float | None
    probability: float | None
    validity_radius_ok: bool | None

    def to_dict(self):
        return asdict(self)


# -- Bernstein primitives ------------------------------------------------------

def vector_bernstein_tail(n, t, sigma=1.0, L=1.0):
    """``2 exp(-n t^2 / (2 (1 + 1.7 t L / sigma)))``."""
    if t < 0 or not sigma > 0 or not L > 0 or n < 1:
        raise ValidationError("need n >= 1, t >= 0 and sigma, L > 0")
    return _clamp(2.0 * math.exp(-n * t * t / (2.0 * (1.0 + 1.7 * t * L / sigma))))


def matrix_bernstein_threshold(p, sigma, L):
    """Smallest ``t`` (exclusive) for which the matrix Bernstein tail holds."""
    return sigma / (4.0 * L) * (1.0 + 1.0 / p**2) / math.log(64.0 * SQRT2 * p**2 * L**2 / sigma**2)


def matrix_bernstein_tail(n, p, t, sigma, L):
    """Tail bound for ``lambda_max`` of an average of ``n`` centered symmetric ``p x p`` matrices."""
    if not sigma > 0 or not L > 0 or n < 1 or p < 1:
        raise ValidationError("need n, p >= 1 and sigma, L > 0")
    thr = matrix_bernstein_threshold(p, sigma, L)
    if not t > thr:
        raise BelowValidityThreshold(f"t={t} is not above the validity threshold {thr}", thr)
    log_term = math.log(64.0 * SQRT2 * p**2 * L**2 / sigma**2)
    expo = math.exp(-n * t * sigma / (8.0 * L * log_term))
    poly = 1.0 + 6.0 / (n**2 * t**2 * sigma**2 * math.log1p(t / sigma) ** 2)
    return _clamp(2.0 * p**2 * expo * poly)


# -- gradient and Hessian tails --------------------------------------------------

def gradient_tail(n, t):
    """Bound on the probability that the averaged gradient at the truth
    exceeds ``t p ||U||_F`` along some traceless direction ``U``."""
    return vector_bernstein_tail(n, t, 1.0, 1.0)


def epsilon_ceiling(p, cos_phi0):
    """Largest spectral deviation ``p cos^2 / (6 (p + 2))`` of the local convexity ball."""
    return p * cos_phi0**2 / (6.0 * (p + 2))


def tau_window(p, cos_phi0, epsilon=None):
    """Interval of admissible Hessian discounts ``tau``.

    With ``s = p (1 - eps)^2 cos^2 / (p + 2)`` the window is
    ``(1 + 1/p^2) / ln(32 sqrt(2) p^2) <= tau s <= 1``; ``epsilon`` defaults
    to its ceiling, the worst case.
    """
    eps = epsilon_ceiling(p, cos_phi0) if epsilon is None else epsilon
    s = p * (1.0 - eps) ** 2 * cos_phi0**2 / (p + 2)
    lo = (1.0 + 1.0 / p**2) / math.log(32.0 * SQRT2 * p**2)
    return lo / s, 1.0 / s


def hessian_discount_tail(n, p, tau, cos_phi0, epsilon=None):
    """Bound on the probability that half the sample Hessian along the
    deviation falls below ``(1 - tau)`` of its expected lower bound."""
    ceiling = epsilon_ceiling(p, cos_phi0)
    eps = ceiling if epsilon is None else epsilon
    if eps > ceiling * (1 + 1e-12) or eps < 0:
        raise EpsilonTooLarge(f"epsilon={eps} exceeds the ceiling {ceiling}")
    lo, hi = tau_window(p, cos_phi0, eps)
    if not lo * (1 - 1e-12) <= tau <= hi * (1 + 1e-12):
        raise TauOutOfWindow(f"tau={tau} outside the window [{lo}, {hi}]", (lo, hi))
    return _hessian_tail_unchecked(n, p, tau, cos_phi0)


def _hessian_tail_unchecked(n, p, tau, c):
    c2 = c * c
    a = 1.0 + 2.0 / p
    expo = math.exp(-n * tau * c2 / (46.0 * math.log(7.0 * p) * a))
    poly = 1.0 + 2e3 * a**4 / (n**2 * tau**4 * c2**4)
    return _clamp(2.0 * p**2 * expo * poly)


def success_probability(n, p, t, tau, cos_phi0):
    """Probability that the sample objective increases on the whole sphere of
    the certified radius, ``1 - gradient_tail - hessian_discount_tail``."""
    return max(0.0, 1.0 - gradient_tail(n, t) - hessian_discount_tail(n, p, tau, cos_phi0))


def primed_radius(t, tau, p, cos_phi0):
    """Frobenius radius ``4 t (p + 2) / ((1 - tau) cos^2)`` around the identity in whitened coordinates."""
    if not 0 <= tau < 1:
        raise ValidationError("tau must lie in [0, 1)")
    if not t > 0:
        raise ValidationError("t must be positive")
    return 4.0 * t / (1.0 - tau) * (p + 2) / cos_phi0**2


def radius(t, tau, p, cos_phi0, lambda_min):
    """Certified radius for ``||T^-1 - theta0^-1||_F``.

    The whitened radius divided by ``lambda_min(theta0)``: whitening by
    ``theta0^1/2`` shrinks Frobenius distances by at least that factor.
    """
    if not lambda_min > 0:
        raise ValidationError("lambda_min must be positive")
    return primed_radius(t, tau, p, cos_phi0) / lambda_min


def theorem1_bound(n, p, cos_phi0, lambda_min, theta):
    """Closed-form bound at ``tau = 3/5`` and ``t = theta / sqrt(n)``.

    Returns ``(radius, probability)`` where the radius is
    ``10 theta (p + 2) / (lambda_min cos^2 sqrt(n))``.
    """
    if n <= p:
        raise NotEnoughSamples(f"need n > p, got n={n}, p={p}")
    if theta < 0:
        raise ValidationError("theta must be nonnegative")
    c2 = cos_phi0**2
    a = 1.0 + 2.0 / p
    rad = 10.0 * theta * (p + 2) / (lambda_min * c2 * math.sqrt(n))
    g = 2.0 * math.exp(-theta**2 / (2.0 * (1.0 + 1.7 * theta / math.sqrt(n))))
    h = 2.0 * p**2 * math.exp(-n * c2 / (77.0 * math.log(7.0 * p) * a)) * (1.0 + 15e3 * a**4 / (n**2 * c2**4))
    return rad, _clamp(1.0 - g - h)


def corollary1_tail(n, p, theta):
    """Tail probability for the identity shape, valid for ``theta < sqrt(n)/4``."""
    if not theta < math.sqrt(n) / 4:
        raise ValidationError("needs theta < sqrt(n)/4")
    a = 1.0 + 2.0 / p
    return _clamp(
        2.0 * math.exp(-theta**2 / 3.0)
        + 2.0 * p**2 * math.exp(-n / (77.0 * math.log(7.0 * p) * a)) * (1.0 + 15e3 * a**4 / n**2)
    )


# -- optimization over (t, tau) ----------------------------------------------------

def min_gradient_level(n, budget):
    """Smallest ``t`` with ``gradient_tail(n, t) <= budget``.

    Solves ``n t^2 = 2 c (1 + 1.7 t)`` with ``c = ln(2 / budget)``.
    """
    if not budget > 0:
        return math.inf
    if budget >= 2.0:
        return 0.0
    c = math.log(2.0 / budget)
    return (3.4 * c + math.sqrt(11.56 * c * c + 8.0 * n * c)) / (2.0 * n)


def _tau_range(p, cos_phi0):
    lo, hi = tau_window(p, cos_phi0)
    return lo, min(hi, 1.0 - 1e-9)


def optimize_bound(query: BoundQuery, grid_size: int = 200, n_refine: int = 20) -> BoundResult:
    """Minimize the certified radius subject to ``success_probability >= confidence``.

    A ``grid_size x grid_size`` logarithmic grid over ``(t, tau)`` locates
    feasible regions.  The ``n_refine`` best ``tau`` grid values are then
    refined: for fixed ``tau`` the constrained optimum sits on the
    constraint boundary, whose ``t`` is available in closed form, and a
    bounded Brent search over ``tau`` between the neighbouring grid values
    finishes the job.  ``feasible`` is False when no grid point meets the
    constraint.
    """
    n, p, c, lam, conf = query.n, query.p, query.cos_phi0, query.lambda_min, query.confidence
    lo, hi = _tau_range(p, c)
    infeasible = BoundResult(n, p, c, lam, conf, False, None, None, None, None, None, None)
    if not lo < hi:
        return infeasible

    # log spacing in (1 - tau) resolves the 1/(1 - tau) blow-up near 1
    taus = 1.0 - np.geomspace(1.0 - lo, 1.0 - hi, grid_size)
    ts = np.geomspace(1e-6, 1e2, grid_size)
    h = np.array([_hessian_tail_unchecked(n, p, tau, c) for tau in taus])
    g = np.array([gradient_tail(n, t) for t in ts])
    ok = (1.0 - g[None, :] - h[:, None]) >= conf
    if not ok.any():
        return infeasible
    rad = np.where(ok, 4.0 * ts[None, :] / (1.0 - taus[:, None]), np.inf)
    best_per_tau = rad.min(axis=1)

    def objective(tau):
        b = 1.0 - conf - _hessian_tail_unchecked(n, p, tau, c)
        t = min_gradient_level(n, b)
        return 4.0 * t / (1.0 - tau) if math.isfinite(t) else math.inf, t

    best = (math.inf, None, None)
    order = np.argsort(best_per_tau, kind="stable")[: n_refine]
    for j in order:
        if not np.isfinite(best_per_tau[j]):
            continue
        a = taus[max(j - 1, 0)]
        b = taus[min(j + 1, grid_size - 1)]
        cands = [taus[j]]
        if b > a:
            sol = optimize.minimize_scalar(
                lambda x: min(objective(x)[0], 1e300), bounds=(a, b), method="bounded", options={"xatol": 1e-12}
            )
            cands.append(float(sol.x))
        for tau in cands:
            val, t = objective(tau)
            if val < best[0]:
                best = (val, float(tau), t)

    _, tau_star, t_star = best
    # the boundary t meets the constraint with equality; nudge up so rounding cannot break it
    t_star = t_star * (1.0 + 1e-12)
    prob = success_probability(n, p, t_star, tau_star, c)
    rad_primed = primed_radius(t_star, tau_star, p, c)
    return BoundResult(
        n=n,
        p=p,
        cos_phi0=c,
        lambda_min=lam,
        confidence=conf,
        feasible=True,
        radius=rad_primed / lam,
        t_star=t_star,
        tau_star=tau_star,
        theta=t_star * math.sqrt(n),
        probability=prob,
        validity_radius_ok=bool(rad_primed <= epsilon_ceiling(p, c)),
    )


def hessian_tail_floor(n, p, cos_phi0):
    """Smallest Hessian tail reachable over the usable ``tau`` window."""
    lo, hi = _tau_range(p, cos_phi0)
    if not lo < hi:
        return 1.0
    return _hessian_tail_unchecked(n, p, hi, cos_phi0)
