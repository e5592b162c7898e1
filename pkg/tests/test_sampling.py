import numpy as np
import pytest

from tylerbound.exceptions import NonPositiveTexture, ValidationError, ZeroSample
from tylerbound.sampling import (
    SampleSet,
    SeededStream,
    constant_texture,
    inverse_chi2_texture,
    normalize_rows,
    sample_acg,
    sample_compound_gaussian,
)
from tylerbound.shape import identity, make_shape

from .helpers import random_spd, random_symmetric

N_BIG = 1_000_000


def _second_moment_z(rows):
    """Entrywise z-scores of p * mean(x x^T) against the identity."""
    n, p = rows.shape
    zmax = 0.0
    for i in range(p):
        for j in range(i, p):
            v = p * rows[:, i] * rows[:, j]
            se = v.std(ddof=1) / np.sqrt(n)
            zmax = max(zmax, abs(v.mean() - (i == j)) / se)
    return zmax


def test_dimension_one_is_plus_minus_one():
    s = sample_acg(identity(1), 1000, SeededStream(1))
    assert set(np.unique(s.rows)) <= {-1.0, 1.0}


def test_rows_unit_norm(rng):
    for p in (1, 3, 20):
        s = sample_acg(random_spd(rng, p, cond=1e3), 500, SeededStream(5, p))
        np.testing.assert_allclose(np.linalg.norm(s.rows, axis=1), 1.0, atol=1e-12)
        assert s.n == 500 and s.p == p and s.model == "acg"


def test_determinism_bitwise():
    shape = make_shape([[2.0, 0.5], [0.5, 1.0]])
    a = sample_acg(shape, 300, SeededStream(123, 7))
    b = sample_acg(shape, 300, SeededStream(123, 7))
    assert a.rows.tobytes() == b.rows.tobytes()
    c = sample_acg(shape, 300, SeededStream(123, 8))
    assert not np.array_equal(a.rows, c.rows)


def test_stream_independent_of_other_streams():
    shape = identity(4)
    first = sample_acg(shape, 50, SeededStream(9, 3)).rows
    for k in range(5):
        sample_acg(shape, 50, SeededStream(9, k))
    assert np.array_equal(first, sample_acg(shape, 50, SeededStream(9, 3)).rows)


def test_acg_scale_invariance(rng):
    shape = random_spd(rng, 6, cond=30)
    base = sample_acg(shape, 200, SeededStream(2)).rows
    for c in (1e-6, 1.0, 1e6):
        other = sample_acg(shape.scaled(c), 200, SeededStream(2)).rows
        assert np.max(np.abs(other - base)) <= 1e-12


def test_uniform_sphere_second_moment():
    s = sample_acg(identity(4), N_BIG, SeededStream(11))
    assert _second_moment_z(s.rows) <= 4.0


def test_first_moment_of_quadratic_form(rng):
    p = 5
    rows = sample_acg(identity(p), N_BIG, SeededStream(12)).rows
    for _ in range(5):
        u = random_symmetric(rng, p)
        v = np.einsum("ij,jk,ik->i", rows, u, rows)
        se = v.std(ddof=1) / np.sqrt(len(v))
        assert abs(v.mean() - np.trace(u) / p) <= 4 * se


def test_constant_texture_matches_acg():
    shape = make_shape([[1.0, 0.3, 0.0], [0.3, 2.0, 0.1], [0.0, 0.1, 0.5]])
    acg = sample_acg(shape, 1000, SeededStream(4))
    cg1 = sample_compound_gaussian(shape, constant_texture(1.0), 1000, SeededStream(4))
    assert acg.rows.tobytes() == cg1.rows.tobytes()
    cg3 = sample_compound_gaussian(shape, constant_texture(3.0), 1000, SeededStream(4))
    np.testing.assert_allclose(cg3.rows, acg.rows, atol=1e-15)
    assert cg3.model == "compound-gaussian"


def test_constant_texture_moments_large_sample():
    s = sample_compound_gaussian(identity(3), constant_texture(1.0), N_BIG, SeededStream(21))
    assert _second_moment_z(s.rows) <= 4.0
    # second moment: E[(p x1 x2)^2] = p^2 / (p (p + 2))
    v = (3 * s.rows[:, 0] * s.rows[:, 1]) ** 2
    assert abs(v.mean() - 9 / 15) <= 4 * v.std(ddof=1) / np.sqrt(N_BIG)


def test_heavy_tailed_texture_normalizes_to_uniform():
    s = sample_compound_gaussian(identity(4), inverse_chi2_texture(1.0), N_BIG, SeededStream(31))
    assert np.max(np.abs(s.raw)) > 1e3  # heavy tails really are present
    assert _second_moment_z(s.rows) <= 4.0


def test_texture_order_is_texture_first():
    seen = {}

    def spy(rng, n):
        seen["first"] = rng.random()
        return np.ones(n)

    sample_compound_gaussian(identity(2), spy, 5, SeededStream(8))
    assert seen["first"] == SeededStream(8).generator().random()


def test_non_positive_texture():
    with pytest.raises(NonPositiveTexture):
        sample_compound_gaussian(identity(2), lambda rng, n: -np.ones(n), 5, SeededStream(0))
    with pytest.raises(NonPositiveTexture):
        sample_compound_gaussian(identity(2), lambda rng, n: np.zeros(n), 5, SeededStream(0))


@pytest.mark.parametrize("n", [0, -1, 2.5])
def test_bad_sample_count(n):
    with pytest.raises(ValidationError):
        sample_compound_gaussian(identity(2), constant_texture(), n, SeededStream(0))
    with pytest.raises(ValidationError):
        sample_acg(identity(2), n, SeededStream(0))


def test_normalize_rows():
    np.testing.assert_array_equal(normalize_rows([[3.0, 4.0]]).rows, [[0.6, 0.8]])
    unit = np.array([[1.0, 0.0], [0.0, -1.0], [0.6, 0.8]])
    s = normalize_rows(unit)
    assert np.max(np.abs(s.rows - unit)) <= 1e-15
    assert s.model == "external"
    with pytest.raises(ZeroSample) as exc:
        normalize_rows([[1.0, 1.0], [0.0, 0.0]])
    assert exc.value.row == 2


def test_sampleset_validation():
    with pytest.raises(ValidationError):
        SampleSet(np.array([[1.0, 1.0]]))
    with pytest.raises(ValidationError):
        SampleSet(np.array([[1.0]]), model="weird")


def test_stream_validation():
    with pytest.raises(ValidationError):
        SeededStream(-1)
    with pytest.raises(ValidationError):
        SeededStream(2**64)
    with pytest.raises(ValidationError):
        SeededStream(0, -1)


def test_csv_export(tmp_path):
    s = sample_acg(identity(3), 10, SeededStream(1))
    s.to_csv(tmp_path / "s.csv")
    back = np.loadtxt(tmp_path / "s.csv", delimiter=",")
    assert np.array_equal(back, s.rows)
