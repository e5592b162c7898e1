import numpy as np

from tylerbound.shape import make_shape

FRAME = np.array([
    [1.0, 0.0],
    [0.0, 1.0],
    [2 ** -0.5, 2 ** -0.5],
    [2 ** -0.5, -(2 ** -0.5)],
])


def random_spd(rng, p, cond=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    w = np.exp(rng.uniform(0, np.log(cond), size=p))
    return make_shape((q * w) @ q.T)


def random_orthogonal(rng, p):
    q, r = np.linalg.qr(rng.standard_normal((p, p)))
    return q * np.sign(np.diag(r))


def random_symmetric(rng, p):
    a = rng.standard_normal((p, p))
    return (a + a.T) / 2
