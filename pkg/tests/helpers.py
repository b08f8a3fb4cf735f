import numpy as np


def random_orthonormal(rng, L, N):
    A = rng.normal(size=(L, N)) + 1j * rng.normal(size=(L, N))
    return np.linalg.qr(A)[0]


def random_full_rank(rng, L, N):
    return rng.normal(size=(L, N)) + 1j * rng.normal(size=(L, N))
