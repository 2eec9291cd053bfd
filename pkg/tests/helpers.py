import numpy as np

from hhfactor.reflectors import ReflectorProduct


def random_unit(rng, n):
    x = rng.standard_normal(n)
    return x / np.linalg.norm(x)


def random_product(rng, n, h, random_signs=True):
    V = rng.standard_normal((h, n))
    signs = np.where(rng.standard_normal(n) >= 0, 1.0, -1.0) if random_signs else np.ones(n)
    return ReflectorProduct.from_vectors(V, signs, n=n)


def dense_product(vectors, signs):
    n = len(signs)
    M = np.eye(n)
    for u in vectors:
        M = (np.eye(n) - 2.0 * np.outer(u, u)) @ M
    return np.diag(signs) @ M
