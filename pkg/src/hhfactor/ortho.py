"""Approximating an orthonormal matrix by a few Householder reflectors.

Everything here is driven by the spectrum of ``Z = U + U^T``. With ``z``
sorted ascending and ``n_minus`` negative entries:

* the constrained approximation (mutually orthogonal reflector vectors)
  uses eigenvectors of ``Z``; its error is ``2n - sum |z_k|``;
* the unconstrained approximation walks the real Schur form of ``U`` and
  flips one eigenvalue ``-1`` per reflector, or a whole complex pair with
  negative real part per two reflectors; its error is
  ``2 n_plus - sum_{k > n_minus} z_k``;
* the partial QR baseline gives the closed-form expected bound
  ``2(n - h) - 2 sqrt(2/pi) sqrt(n - h)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from .reflectors import ApproxReport, ReflectorProduct, relative_error, squared_error, to_dense

__all__ = [
    "NotOrthonormalError",
    "SpectralData",
    "spectral_prep",
    "constrained_approx",
    "unconstrained_approx",
    "sign_select",
    "optimal_signs",
    "partial_qr_approx",
    "expected_bound_ortho",
    "ORTHO_METHODS",
    "approximate_orthonormal",
]

# z entries above -ZERO_TOL are treated as nonnegative
ZERO_TOL = 1e-12
# complex pairs with |beta| below this are split into two real eigenvalues
PAIR_TOL = 1e-10


class NotOrthonormalError(ValueError):
    pass


@dataclass
class SpectralData:
    """Eigen-structure of an orthonormal ``U`` and of ``Z = U + U^T``.

    ``complex_pairs`` holds ``(alpha, beta, re_t, im_t)`` with ``beta > 0``
    where ``t = re_t + 1j * im_t`` is a unit eigenvector of ``U`` for the
    eigenvalue ``alpha + 1j * beta``.
    """

    z: np.ndarray
    V: np.ndarray
    real_pairs: List[Tuple[float, np.ndarray]] = field(default_factory=list)
    complex_pairs: List[Tuple[float, float, np.ndarray, np.ndarray]] = field(default_factory=list)
    n_minus: int = 0

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def n_plus(self) -> int:
        return self.n - self.n_minus


def check_orthonormal(U: np.ndarray) -> np.ndarray:
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise NotOrthonormalError(f"expected a square matrix, got shape {U.shape}")
    n = U.shape[0]
    dev = np.linalg.norm(U.T @ U - np.eye(n))
    if not np.isfinite(dev) or dev > 1e-8 * n:
        raise NotOrthonormalError(f"matrix is not orthonormal (||U^T U - I||_F = {dev:.3e})")
    return U


def spectral_prep(U: np.ndarray) -> SpectralData:
    """Eigendecomposition of ``Z`` and real Schur data of ``U``.

    For a normal matrix the real Schur form is block diagonal: ``1x1``
    blocks carry the real eigenvalues ``+-1`` and ``2x2`` blocks the
    rotations ``alpha +- i beta``. Schur vectors are orthonormal even for
    repeated eigenvalues.
    """
    U = check_orthonormal(U)
    n = U.shape[0]
    Z = U + U.T
    z, V = np.linalg.eigh(0.5 * (Z + Z.T))
    T, Q = scipy.linalg.schur(U, output="real")

    real_pairs: List[Tuple[float, np.ndarray]] = []
    complex_pairs: List[Tuple[float, float, np.ndarray, np.ndarray]] = []
    i = 0
    while i < n:
        if i + 1 < n and T[i + 1, i] != 0.0:
            alpha = 0.5 * (T[i, i] + T[i + 1, i + 1])
            b, c = T[i, i + 1], T[i + 1, i]
            beta = math.sqrt(abs(b * c))
            if beta < PAIR_TOL:
                lam = 1.0 if alpha >= 0 else -1.0
                real_pairs.append((lam, Q[:, i].copy()))
                real_pairs.append((lam, Q[:, i + 1].copy()))
            else:
                # U q1 = alpha q1 + c q2 and U q2 = b q1 + alpha q2 with c = -b,
                # so (q1 + i sign(b) q2) / sqrt(2) belongs to alpha + i beta
                s = 1.0 if b > 0 else -1.0
                re_t = Q[:, i] / math.sqrt(2.0)
                im_t = s * Q[:, i + 1] / math.sqrt(2.0)
                complex_pairs.append((float(alpha), beta, re_t, im_t))
            i += 2
        else:
            lam = 1.0 if T[i, i] >= 0 else -1.0
            real_pairs.append((lam, Q[:, i].copy()))
            i += 1

    n_minus = int(np.sum(z < -ZERO_TOL))
    return SpectralData(z=z, V=V, real_pairs=real_pairs, complex_pairs=complex_pairs, n_minus=n_minus)


def _report(U: np.ndarray, p: ReflectorProduct, predicted: Optional[float]) -> ApproxReport:
    Ubar = to_dense(p)
    return ApproxReport(
        measured_error=squared_error(U, Ubar),
        normalized_error=relative_error(U, Ubar),
        predicted_error=predicted,
    )


def constrained_approx(U: np.ndarray, h: int) -> Tuple[ReflectorProduct, ApproxReport]:
    """Best product of ``h`` reflectors with mutually orthogonal vectors.

    The vectors are the eigenvectors of ``Z`` for its most negative
    eigenvalues; at most ``n_minus`` of them help. The result
    ``I - 2 W W^T`` is symmetric.
    """
    if h < 0:
        raise ValueError("h must be nonnegative")
    U = check_orthonormal(U)
    sd = spectral_prep(U)
    n = sd.n
    used = min(h, sd.n_minus)
    vectors = sd.V[:, :used].T
    p = ReflectorProduct.from_vectors(list(vectors), np.ones(n), n=n, requested_h=h)
    predicted = 2.0 * n - 2.0 * float(np.trace(U)) + 2.0 * float(np.sum(sd.z[:used]))
    return p, _report(U, p, predicted)


def _pair_reflectors(U, alpha, re_t, im_t):
    """Two reflectors whose product equals ``U`` on the plane of a pair.

    The phase of the Schur vectors is arbitrary, so both signs of ``delta``
    are tried and the one reproducing ``U`` on the plane is kept.
    """
    u_a = math.sqrt(2.0) * re_t
    u_a /= np.linalg.norm(u_a)
    gamma = -math.sqrt(max(1.0 + alpha, 0.0)) / 2.0
    delta = -math.sqrt(max(1.0 - alpha, 0.0)) / 2.0
    plane = np.column_stack([re_t, im_t]) * math.sqrt(2.0)
    target = U @ plane
    after_a = plane - 2.0 * np.outer(u_a, u_a @ plane)
    best, best_res = None, np.inf
    for dsign in (1.0, -1.0):
        u_b = 2.0 * (gamma * re_t - dsign * delta * im_t)
        u_b /= np.linalg.norm(u_b)
        approx = after_a - 2.0 * np.outer(u_b, u_b @ after_a)
        res = np.linalg.norm(target - approx)
        if res < best_res:
            best, best_res = u_b, res
    return u_a, best


def unconstrained_approx(
    U: np.ndarray, h: int, signs: str = "none"
) -> Tuple[ReflectorProduct, ApproxReport]:
    """Greedy product of ``h`` unconstrained reflectors.

    Eigenvalues of ``U`` with negative real part are consumed in ascending
    order of their ``z`` value: a real ``-1`` costs one reflector (its
    eigenvector), a complex pair ``alpha +- i beta`` costs two. When only
    one slot is left for a pair, the first of its two reflectors is used.

    Parameters
    ----------
    signs : {"none", "select", "optimize"}
        ``"none"`` keeps ``D = I``. ``"select"`` approximates ``-U`` instead
        when that gives a lower error (see :func:`sign_select`).
        ``"optimize"`` builds the reflectors for both ``U`` and ``-U``,
        fits every diagonal sign of ``D`` optimally to ``U`` for each, and
        keeps the better of the two; it is never worse than ``"none"``.

    The predicted error ``2 n_plus - sum_{k > n_minus} z_k`` is reported
    for ``h >= n_minus`` with ``signs="none"``; otherwise it is ``None``.
    """
    if h < 0:
        raise ValueError("h must be nonnegative")
    if signs not in ("none", "select", "optimize"):
        raise ValueError(f"unknown signs mode {signs!r}")
    U = check_orthonormal(U)
    if signs == "optimize":
        cands = []
        for target in (U, -U):
            p = optimal_signs(U, _greedy_product(target, h))
            cands.append((squared_error(U, to_dense(p)), p))
        p = min(cands, key=lambda c: c[0])[1]
        return p, _report(U, p, None)
    s = 1.0
    target = U
    if signs == "select":
        s, target = sign_select(U)
    p = _greedy_product(target, h)
    predicted = None
    if signs == "none":
        sd = spectral_prep(U)
        if h >= sd.n_minus:
            predicted = 2.0 * sd.n_plus - float(np.sum(sd.z[sd.n_minus:]))
    if s < 0:
        p = p.with_signs(-p.signs)
    return p, _report(U, p, predicted)


def _greedy_product(target: np.ndarray, h: int) -> ReflectorProduct:
    n = target.shape[0]
    sd = spectral_prep(target)

    items = []
    for lam, vec in sd.real_pairs:
        if lam < 0:
            items.append((-2.0, ("real", vec)))
    for alpha, _beta, re_t, im_t in sd.complex_pairs:
        if 2.0 * alpha < -ZERO_TOL:
            items.append((2.0 * alpha, ("pair", alpha, re_t, im_t)))
    items.sort(key=lambda item: item[0])

    vectors: List[np.ndarray] = []
    for _key, item in items:
        if len(vectors) >= h:
            break
        if item[0] == "real":
            vectors.append(item[1])
            continue
        _, alpha, re_t, im_t = item
        u_a, u_b = _pair_reflectors(target, alpha, re_t, im_t)
        vectors.append(u_a)
        if len(vectors) < h:
            vectors.append(u_b)

    return ReflectorProduct.from_vectors(vectors, np.ones(n), n=n, requested_h=h)


def _approx_error_estimate(z: np.ndarray) -> float:
    pos = z[z >= -ZERO_TOL]
    return float(np.sum(2.0 - pos))


def sign_select(U: np.ndarray) -> Tuple[float, np.ndarray]:
    """Choose between approximating ``U`` and ``-U``.

    Returns the sign ``s`` whose matrix ``s U`` has the lower full-budget
    unconstrained error ``2 n_plus - sum_{k > n_minus} z_k``. Ties go to
    the larger ``sum_{k > n_minus} z_k`` (fewer reflectors needed), then
    to ``+1``.
    """
    U = check_orthonormal(U)
    z = np.linalg.eigvalsh(U + U.T)
    keys = []
    for zz in (z, -z[::-1]):
        pos = zz[zz >= -ZERO_TOL]
        err = _approx_error_estimate(zz)
        keys.append((round(err, 9), -float(np.sum(pos))))
    if keys[1] < keys[0]:
        return -1.0, -U
    return 1.0, U


def optimal_signs(U: np.ndarray, p: ReflectorProduct) -> ReflectorProduct:
    """Replace ``D`` with the sign diagonal minimizing ``||U - D W||_F``.

    ``W`` is the reflector part of ``p``. The error is
    ``2n - 2 sum_i d_i (W U^T)_ii`` so each sign is set independently.
    """
    W = to_dense(p.with_signs(np.ones(p.n)))
    corr = np.einsum("ij,ij->i", W, U)
    return p.with_signs(np.where(corr >= 0, 1.0, -1.0))


def partial_qr_approx(U: np.ndarray, h: int) -> Tuple[ReflectorProduct, ApproxReport]:
    """Approximation from the first ``h`` Householder steps of a QR sweep.

    With ``D J_h ... J_1 U = [[I, 0], [0, D_1 Ut]]`` and ``D_1 Ut`` of
    positive diagonal, the approximation is ``J_1 ... J_h D`` and its error
    is ``2(n - h) - 2 tr(D_1 Ut)``. Columns that are already reduced use an
    identity slot instead of a reflector.
    """
    U = check_orthonormal(U)
    n = U.shape[0]
    if not 0 <= h <= n - 1:
        raise ValueError(f"h must lie in [0, {n - 1}], got {h}")
    R = U.copy()
    js: List[Optional[np.ndarray]] = []
    for k in range(h):
        x = R[k:, k]
        if np.linalg.norm(x[1:]) <= 1e-15 * max(1.0, abs(x[0])):
            js.append(None)
            continue
        v = x.copy()
        v[0] += math.copysign(np.linalg.norm(x), x[0])
        v /= np.linalg.norm(v)
        R[k:, :] -= 2.0 * np.outer(v, v @ R[k:, :])
        j = np.zeros(n)
        j[k:] = v
        js.append(j)
    d = np.where(np.diag(R) >= 0, 1.0, -1.0)
    # J_1 ... J_h D  ==  D (D J_1 D) ... (D J_h D); D J D reflects along D j
    vectors = [d * j for j in reversed(js) if j is not None]
    p = ReflectorProduct.from_vectors(vectors, d, n=n, requested_h=h)
    trailing = d[h:] * np.diag(R)[h:]
    predicted = 2.0 * (n - h) - 2.0 * float(np.sum(trailing))
    return p, _report(U, p, predicted)


def expected_bound_ortho(n: int, h: int) -> float:
    """Expected partial-QR error ``2(n - h) - (2 sqrt 2 / sqrt pi) sqrt(n - h)``."""
    if not 0 <= h <= n:
        raise ValueError(f"h must lie in [0, {n}]")
    m = n - h
    return 2.0 * m - (2.0 * math.sqrt(2.0) / math.sqrt(math.pi)) * math.sqrt(m)


ORTHO_METHODS = ("constrained", "unconstrained", "unconstrained-d", "qr-baseline", "best")


def approximate_orthonormal(
    U: np.ndarray, h: int, method: str = "unconstrained"
) -> Tuple[ReflectorProduct, ApproxReport]:
    """Approximate ``U`` with ``h`` reflectors by the named method.

    ``unconstrained-d`` is the greedy construction followed by the optimal
    sign diagonal. ``best`` keeps whichever of ``unconstrained-d`` and
    ``qr-baseline`` has the lower error, so it is never worse than the
    partial QR sweep.
    """
    if method == "constrained":
        return constrained_approx(U, h)
    if method == "unconstrained":
        return unconstrained_approx(U, h)
    if method == "unconstrained-d":
        return unconstrained_approx(U, h, signs="optimize")
    if method == "qr-baseline":
        return partial_qr_approx(U, min(h, np.asarray(U).shape[0] - 1))
    if method == "best":
        n = np.asarray(U).shape[0]
        cands = [unconstrained_approx(U, h, signs="optimize")]
        cands.append(partial_qr_approx(U, min(h, n - 1)))
        p, r = min(cands, key=lambda c: c[1].measured_error)
        return p, ApproxReport(r.measured_error, r.normalized_error)
    raise ValueError(f"unknown method {method!r}; expected one of {ORTHO_METHODS}")
