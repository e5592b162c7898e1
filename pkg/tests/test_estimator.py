import numpy as np
import pytest
from sklearn.base import clone

from tylerbound.estimator import (
    SampleShape,
    SolverConfig,
    TylerShape,
    fixed_point_residual,
    scm_estimate,
    tyler_estimate,
)
from tylerbound.exceptions import NotConverged, NotEnoughSamples, SingularSCM, ValidationError
from tylerbound.likelihood import sample_avg
from tylerbound.sampling import SampleSet, SeededStream, normalize_rows, sample_acg
from tylerbound.shape import identity, make_shape

from .helpers import FRAME, random_orthogonal, random_spd


def test_scalar_case():
    x = np.array([[1.0], [-1.0], [1.0]])
    res = tyler_estimate(SampleSet(x), SolverConfig(trace_target=1.0))
    assert res.T.entries[0, 0] == 1.0


def test_symmetric_frame_gives_identity():
    res = tyler_estimate(SampleSet(FRAME))
    np.testing.assert_allclose(res.T.entries, np.eye(2), atol=1e-14)
    assert res.converged and res.iterations == 1


def test_line_samples_do_not_converge():
    x = np.array([[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
    with pytest.raises(NotConverged) as info:
        tyler_estimate(SampleSet(x))
    assert len(info.value.residuals) >= 1


def test_not_enough_samples():
    with pytest.raises(NotEnoughSamples):
        tyler_estimate(SampleSet(np.eye(3)))


def test_solver_config_validation():
    for kw in ({"tol": 0}, {"max_iter": 0}, {"max_iter": 1.5}, {"trace_target": -1.0}):
        with pytest.raises(ValidationError):
            SolverConfig(**kw)


def test_iteration_cap_reports_not_converged():
    s = sample_acg(random_spd(np.random.default_rng(3), 5, cond=100), 40, SeededStream(3))
    with pytest.raises(NotConverged) as info:
        tyler_estimate(s, SolverConfig(max_iter=2))
    assert len(info.value.residuals) == 2


def test_residual_examples():
    assert fixed_point_residual(identity(2), SampleSet(FRAME)) <= 1e-15
    e1 = np.tile([1.0, 0.0], (4, 1))
    assert fixed_point_residual(identity(2), SampleSet(e1)) == pytest.approx(1.0, rel=1e-15)


def test_residual_of_estimate_below_tol():
    s = sample_acg(identity(6), 40, SeededStream(5))
    res = tyler_estimate(s, SolverConfig(tol=1e-11))
    assert res.residual <= 1e-11
    assert fixed_point_residual(res.T, s) <= 1e-10


@pytest.mark.parametrize("p", [2, 5, 10, 25, 50])
def test_fixed_point_property(p):
    for k in range(20):
        s = sample_acg(identity(p), 4 * p, SeededStream(100 + p, k))
        res = tyler_estimate(s)
        assert res.converged
        assert fixed_point_residual(res.T, s) <= 1e-10


def test_per_sample_scale_invariance(rng):
    for k in range(10):
        s = sample_acg(random_spd(rng, 5), 30, SeededStream(7, k))
        c = np.exp(rng.uniform(-5, 5, size=(30, 1)))
        a = tyler_estimate(s.rows).T.entries
        b = tyler_estimate(c * s.rows).T.entries
        assert np.linalg.norm(a - b) <= 1e-12 * np.linalg.norm(a)


def test_orthogonal_equivariance(rng):
    for k in range(10):
        p = int(rng.integers(2, 9))
        s = sample_acg(random_spd(rng, p), 5 * p, SeededStream(8, k))
        q = random_orthogonal(rng, p)
        a = tyler_estimate(s).T.entries
        b = tyler_estimate(SampleSet(s.rows @ q.T)).T.entries
        rot = q @ a @ q.T
        assert np.linalg.norm(b - rot) <= 1e-8 * np.linalg.norm(rot)


def test_trace_constraint(rng):
    for k in range(20):
        p = int(rng.integers(2, 12))
        target = float(10 ** rng.uniform(-2, 2))
        s = sample_acg(random_spd(rng, p, cond=50), 3 * p + 2, SeededStream(9, k))
        res = tyler_estimate(s, SolverConfig(trace_target=target))
        assert res.trace_target == target
        assert abs(np.trace(res.T.inverse) - target) <= 1e-8 * target


def test_objective_non_increasing(rng):
    for k in range(5):
        p = 6
        s = sample_acg(random_spd(rng, p, cond=100), 20, SeededStream(10, k))
        vals = []
        tyler_estimate(s, callback=lambda _, T: vals.append(sample_avg("neg_loglik", make_shape(np.linalg.inv(T)), None, s)))
        assert len(vals) > 3
        assert all(b <= a + 1e-10 for a, b in zip(vals, vals[1:]))


# -- sample covariance baseline ---------------------------------------------------

def test_scm_frame():
    np.testing.assert_allclose(scm_estimate(SampleSet(FRAME), 2.0).entries, np.eye(2), atol=1e-15)


def test_scm_rank_deficient():
    with pytest.raises(NotEnoughSamples):
        scm_estimate(SampleSet(np.eye(3)[:2]))
    with pytest.raises(SingularSCM):
        scm_estimate(np.tile([[1.0, 0.0]], (5, 1)))


def test_scm_duplicated_samples():
    a = scm_estimate(SampleSet(FRAME)).entries
    b = scm_estimate(SampleSet(np.vstack([FRAME, FRAME]))).entries
    np.testing.assert_allclose(a, b, rtol=1e-15, atol=1e-15)


def test_scm_uses_raw_vectors():
    raw = np.array([[10.0, 0.0], [0.0, 1.0], [-10.0, 0.0], [0.0, -1.0]])
    ns = normalize_rows(raw)
    np.testing.assert_allclose(scm_estimate(ns, 2.0).entries, scm_estimate(raw, 2.0).entries)
    # unit rows alone would give the identity
    assert not np.allclose(scm_estimate(ns, 2.0).entries, np.eye(2))


def test_scm_trace_target(rng):
    x = rng.standard_normal((50, 4)) * 1e200
    s = scm_estimate(x, 3.0)
    assert np.trace(s.inverse) == pytest.approx(3.0, rel=1e-12)


# -- sklearn wrappers -------------------------------------------------------------

def test_tyler_shape_estimator(rng):
    x = rng.standard_normal((60, 4)) * rng.uniform(0.1, 10, size=(60, 1))
    est = TylerShape(tol=1e-11).fit(x)
    ref = tyler_estimate(x, SolverConfig(tol=1e-11))
    np.testing.assert_array_equal(est.shape_, ref.T.entries)
    np.testing.assert_allclose(est.shape_ @ est.precision_, np.eye(4), atol=1e-12)
    assert est.n_features_in_ == 4 and est.n_iter_ == ref.iterations
    z = est.transform(x)
    np.testing.assert_allclose(np.linalg.norm(z, axis=1), 1.0, rtol=1e-14)
    # whitened directions have (p/n) sum z z^T / 1 = I at the fixed point
    w = tyler_estimate(z).T.entries
    np.testing.assert_allclose(w, np.eye(4), atol=1e-8)
    assert est.mahalanobis(x).shape == (60,)
    assert np.isfinite(est.score(x))


def test_sklearn_params_and_clone():
    est = TylerShape(tol=1e-9, max_iter=50, trace_target=2.0)
    assert est.get_params() == {"tol": 1e-9, "max_iter": 50, "trace_target": 2.0}
    c = clone(est)
    assert c.get_params() == est.get_params() and not hasattr(c, "shape_")
    assert SampleShape(trace_target=1.0).get_params() == {"trace_target": 1.0}


def test_sample_shape_estimator():
    est = SampleShape(trace_target=2.0).fit(FRAME)
    np.testing.assert_allclose(est.shape_, np.eye(2), atol=1e-15)


def test_unfitted_transform_raises(rng):
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        TylerShape().transform(rng.standard_normal((3, 2)))
