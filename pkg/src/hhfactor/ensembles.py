"""Seeded random test matrices and a few named transforms."""
from __future__ import annotations

import numpy as np
from scipy.linalg import hadamard as _hadamard

__all__ = [
    "rng_for",
    "random_orthonormal",
    "hadamard_orthonormal",
    "rotation",
    "random_indefinite",
    "random_wishart",
    "random_symmetric",
]


def rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.uint64(seed))


def random_orthonormal(n: int, seed: int) -> np.ndarray:
    """Orthonormal factor of the QR decomposition of a Gaussian matrix.

    Columns are sign-corrected with ``diag(R)`` so the result is Haar
    distributed.
    """
    x = rng_for(seed).standard_normal((n, n))
    q, r = np.linalg.qr(x)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def hadamard_orthonormal(n: int) -> np.ndarray:
    """Sylvester Hadamard matrix scaled to be orthonormal (``n`` a power of 2)."""
    return _hadamard(n).astype(np.float64) / np.sqrt(n)


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def random_indefinite(n: int, seed: int) -> np.ndarray:
    """``(X + X^T) / 2`` with i.i.d. standard Gaussian ``X``."""
    x = rng_for(seed).standard_normal((n, n))
    return 0.5 * (x + x.T)


def random_wishart(n: int, seed: int) -> np.ndarray:
    """``X X^T`` with i.i.d. standard Gaussian ``X`` (positive definite)."""
    x = rng_for(seed).standard_normal((n, n))
    s = x @ x.T
    return 0.5 * (s + s.T)


def random_symmetric(n: int, seed: int, ensemble: str) -> np.ndarray:
    if ensemble == "indefinite":
        return random_indefinite(n, seed)
    if ensemble == "posdef":
        return random_wishart(n, seed)
    raise ValueError(f"unknown ensemble {ensemble!r}")
