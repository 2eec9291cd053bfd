"""Products of Householder reflectors and factored symmetric operators.

A :class:`ReflectorProduct` stores ``h`` unit vectors and a diagonal of
signs and represents the orthonormal matrix

    Ubar = D @ U_h @ ... @ U_1,    U_k = I - 2 u_k u_k^T,

where ``U_1`` is the first reflector applied to an input vector. A
:class:`FactoredSymmetric` pairs such a basis with a real spectrum and
represents ``Ubar @ diag(s) @ Ubar.T``.

All application routines work reflector by reflector and never build the
dense matrix, so one product costs ``4nh`` flops per vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

__all__ = [
    "ReflectorProduct",
    "FactoredSymmetric",
    "ApproxReport",
    "FlopCounter",
    "identity_product",
    "apply",
    "apply_transpose",
    "apply_symmetric",
    "to_dense",
    "relative_error",
    "squared_error",
]

# vectors with a norm below this are identity slots and get dropped
_ZERO_NORM = 1e-14
# accepted deviation from unit norm for stored reflector vectors
UNIT_TOL = 1e-9


class FlopCounter:
    """Accumulates floating point operation counts.

    A reflector applied to one vector costs ``4n`` flops (a dot product and
    an axpy). Sign flips are negations and are not counted.
    """

    def __init__(self) -> None:
        self.flops = 0

    def add(self, count: int) -> None:
        self.flops += int(count)

    def reset(self) -> None:
        self.flops = 0


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ReflectorProduct:
    """Orthonormal matrix ``D U_h ... U_1`` held in factored form.

    Parameters
    ----------
    vectors : array of shape (h, n)
        Unit reflector vectors in application order (row 0 is applied
        first).
    signs : array of shape (n,)
        Diagonal of ``D``; entries must be exactly +1 or -1.
    requested_h : int, optional
        Reflector budget asked for by the construction that built this
        product. Identity slots are not stored, so ``h`` can be smaller.
    """

    vectors: np.ndarray
    signs: np.ndarray
    requested_h: Optional[int] = None

    def __post_init__(self) -> None:
        signs = _freeze(np.asarray(self.signs, dtype=np.float64).ravel())
        n = signs.shape[0]
        if n == 0:
            raise ValueError("dimension must be positive")
        if not np.all((signs == 1.0) | (signs == -1.0)):
            raise ValueError("signs must be exactly +1 or -1")
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.size == 0:
            vectors = np.zeros((0, n))
        vectors = vectors.reshape(-1, n) if vectors.ndim == 1 else vectors
        if vectors.ndim != 2 or vectors.shape[1] != n:
            raise ValueError(f"reflector vectors must have shape (h, {n})")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("reflector vectors must be finite")
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise ValueError("reflector vectors must have unit norm")
        object.__setattr__(self, "vectors", _freeze(vectors))
        object.__setattr__(self, "signs", signs)
        if self.requested_h is None:
            object.__setattr__(self, "requested_h", vectors.shape[0])

    @classmethod
    def from_vectors(
        cls,
        vectors: Sequence[np.ndarray],
        signs: Optional[np.ndarray] = None,
        n: Optional[int] = None,
        requested_h: Optional[int] = None,
    ) -> "ReflectorProduct":
        """Build a product from possibly unnormalized vectors.

        Zero (or numerically zero) vectors are identity slots: they are
        dropped and only counted in ``requested_h``.
        """
        vecs = [np.asarray(v, dtype=np.float64).ravel() for v in vectors]
        if n is None:
            if signs is not None:
                n = len(signs)
            elif vecs:
                n = vecs[0].shape[0]
            else:
                raise ValueError("cannot infer dimension")
        kept = []
        for v in vecs:
            nv = np.linalg.norm(v)
            if nv > _ZERO_NORM:
                kept.append(v / nv)
        if signs is None:
            signs = np.ones(n)
        arr = np.array(kept).reshape(len(kept), n)
        if requested_h is None:
            requested_h = len(vecs)
        return cls(arr, signs, requested_h=requested_h)

    @property
    def n(self) -> int:
        return self.signs.shape[0]

    @property
    def h(self) -> int:
        """Effective number of stored (non-identity) reflectors."""
        return self.vectors.shape[0]

    def with_signs(self, signs: np.ndarray) -> "ReflectorProduct":
        return ReflectorProduct(self.vectors, signs, self.requested_h)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ReflectorProduct):
            return NotImplemented
        return (
            self.vectors.shape == other.vectors.shape
            and self.vectors.tobytes() == other.vectors.tobytes()
            and self.signs.tobytes() == other.signs.tobytes()
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class FactoredSymmetric:
    """Symmetric matrix ``Ubar diag(spectrum) Ubar^T``."""

    basis: ReflectorProduct
    spectrum: np.ndarray

    def __post_init__(self) -> None:
        spectrum = _freeze(np.asarray(self.spectrum, dtype=np.float64).ravel())
        if spectrum.shape[0] != self.basis.n:
            raise ValueError("spectrum length must match the basis dimension")
        if not np.all(np.isfinite(spectrum)):
            raise ValueError("spectrum must be finite")
        object.__setattr__(self, "spectrum", spectrum)

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def h(self) -> int:
        return self.basis.h

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FactoredSymmetric):
            return NotImplemented
        return (
            self.basis == other.basis
            and self.spectrum.tobytes() == other.spectrum.tobytes()
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass
class ApproxReport:
    """Outcome of one approximation.

    ``measured_error`` is the squared Frobenius distance between target and
    approximation, ``normalized_error`` divides it by ``4 ||X||_F^2``.
    ``trace`` holds per-iteration normalized errors for iterative methods.
    """

    measured_error: float
    normalized_error: float
    predicted_error: Optional[float] = None
    trace: list = field(default_factory=list)
    iterations: int = 0


def identity_product(n: int) -> ReflectorProduct:
    return ReflectorProduct(np.zeros((0, n)), np.ones(n), requested_h=0)


def _check_length(n: int, x: np.ndarray) -> None:
    if x.ndim not in (1, 2) or x.shape[0] != n:
        raise ValueError(f"dimension mismatch: expected leading size {n}, got {x.shape}")


def _columns(x: np.ndarray) -> int:
    return 1 if x.ndim == 1 else x.shape[1]


def _scale_rows(x: np.ndarray, d: np.ndarray) -> None:
    if x.ndim == 1:
        x *= d
    else:
        x *= d[:, None]


def apply(
    p: ReflectorProduct, x: np.ndarray, counter: Optional[FlopCounter] = None
) -> np.ndarray:
    """Compute ``D U_h ... U_1 x``.

    ``x`` may be a vector of length ``n`` or an ``(n, m)`` array whose
    columns are transformed independently.
    """
    y = np.array(x, dtype=np.float64, copy=True)
    _check_length(p.n, y)
    for u in p.vectors:
        y -= np.multiply.outer(2.0 * u, u @ y)
    _scale_rows(y, p.signs)
    if counter is not None:
        counter.add(4 * p.n * p.h * _columns(y))
    return y


def apply_transpose(
    p: ReflectorProduct, x: np.ndarray, counter: Optional[FlopCounter] = None
) -> np.ndarray:
    """Compute ``U_1 ... U_h D x``, the inverse of :func:`apply`."""
    y = np.array(x, dtype=np.float64, copy=True)
    _check_length(p.n, y)
    _scale_rows(y, p.signs)
    for u in p.vectors[::-1]:
        y -= np.multiply.outer(2.0 * u, u @ y)
    if counter is not None:
        counter.add(4 * p.n * p.h * _columns(y))
    return y


def apply_symmetric(
    f: FactoredSymmetric, x: np.ndarray, counter: Optional[FlopCounter] = None
) -> np.ndarray:
    """Compute ``Ubar diag(s) Ubar^T x`` with two reflector passes.

    Costs ``(8h + 1) n`` flops per column.
    """
    y = apply_transpose(f.basis, x, counter)
    _scale_rows(y, f.spectrum)
    if counter is not None:
        counter.add(f.n * _columns(y))
    return apply(f.basis, y, counter)


def to_dense(obj: Union[ReflectorProduct, FactoredSymmetric]) -> np.ndarray:
    """Dense realization, column ``j`` being the image of ``e_j``."""
    eye = np.eye(obj.n)
    if isinstance(obj, FactoredSymmetric):
        return apply_symmetric(obj, eye)
    return apply(obj, eye)


def squared_error(X: np.ndarray, Xbar: np.ndarray) -> float:
    X = np.asarray(X, dtype=np.float64)
    Xbar = np.asarray(Xbar, dtype=np.float64)
    if X.shape != Xbar.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {Xbar.shape}")
    return float(np.sum((X - Xbar) ** 2))


def relative_error(X: np.ndarray, Xbar: np.ndarray) -> float:
    """Normalized representation error ``||X - Xbar||_F^2 / (4 ||X||_F^2)``.

    Lies in ``[0, 1]`` whenever both arguments are orthonormal.
    """
    X = np.asarray(X, dtype=np.float64)
    scale = float(np.sum(X**2))
    if scale == 0.0:
        raise ValueError("reference matrix must be nonzero")
    return squared_error(X, Xbar) / (4.0 * scale)
