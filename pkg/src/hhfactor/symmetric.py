"""Symmetric Householder factorization (SHF) and its spectrum-update variant.

A symmetric ``S`` is approximated by

    Sbar = D U_1 ... U_h diag(sbar) U_h ... U_1 D.

With every reflector but ``U_k`` fixed the error is
``||A_k - U_k B_k U_k||_F^2 = const + 4 C(u_k)`` where

    A_k = U_{k-1} ... U_1 D S D U_1 ... U_{k-1}
    B_k = U_{k+1} ... U_h diag(sbar) U_h ... U_{k+1}
    C(u) = u^T (A B + B A) u - 2 (u^T A u)(u^T B u).

Reflectors are updated one at a time by minimizing ``C`` over the unit
sphere, then ``D`` and optionally ``sbar`` are refit. Each of these steps
never increases the error.

Indexing note: ``u_1`` sits next to ``D``, so as a :class:`ReflectorProduct`
(stored in application order) the vectors appear as ``u_h, ..., u_1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from .linesearch import bounded_minimize
from .reflectors import (
    ApproxReport,
    FactoredSymmetric,
    ReflectorProduct,
    apply_transpose,
    relative_error,
    squared_error,
    to_dense,
)

__all__ = [
    "SHFConfig",
    "SHFState",
    "NotPositiveDefiniteError",
    "build_AB",
    "cost_C",
    "grad_C",
    "u_dagger",
    "u_ddagger",
    "rayleigh_init",
    "combine_init",
    "refine_reflector",
    "update_diagonal",
    "update_spectrum",
    "shf",
    "partial_eig_baseline",
    "spectrum_order",
]

SQRT2 = math.sqrt(2.0)


class NotPositiveDefiniteError(ValueError):
    pass


@dataclass
class SHFConfig:
    """Settings for :func:`shf`.

    ``init_mode`` is ``"paper"`` (reflectors grown one by one from identity
    slots) or ``"baseline"`` (start from :func:`partial_eig_baseline`).
    ``ddagger`` selects the quartic-term candidate: ``"auto"`` tries the
    Kronecker route and, when both matrices are positive definite, the
    Rayleigh route, keeping whichever ends with the lower cost.
    ``spectrum_each_iteration=False`` runs the spectrum refit only once,
    after the last outer iteration.
    """

    h: int
    max_outer: int = 100
    outer_tol: float = 1e-8
    inner_max: int = 200
    line_tol: float = 1e-6
    init_mode: str = "paper"
    spectrum_update: bool = False
    spectrum_each_iteration: bool = True
    ddagger: str = "auto"

    def __post_init__(self) -> None:
        if self.h < 0:
            raise ValueError("h must be nonnegative")
        if self.outer_tol <= 0 or self.line_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_outer < 0 or self.inner_max < 0:
            raise ValueError("iteration counts must be nonnegative")
        if self.init_mode not in ("paper", "baseline"):
            raise ValueError(f"unknown init_mode {self.init_mode!r}")
        if self.ddagger not in ("auto", "kron", "rayleigh"):
            raise ValueError(f"unknown ddagger mode {self.ddagger!r}")


@dataclass
class SHFState:
    """Mutable working state of one SHF run.

    ``vectors[k - 1]`` is ``u_k`` or ``None`` for an identity slot.
    """

    S: np.ndarray
    vectors: List[Optional[np.ndarray]]
    signs: np.ndarray
    spectrum: np.ndarray
    trace: List[float] = field(default_factory=list)

    @property
    def h(self) -> int:
        return len(self.vectors)

    @property
    def n(self) -> int:
        return self.S.shape[0]

    def basis(self) -> ReflectorProduct:
        return ReflectorProduct.from_vectors(
            [u for u in reversed(self.vectors) if u is not None],
            self.signs,
            n=self.n,
            requested_h=self.h,
        )

    def factor(self) -> FactoredSymmetric:
        return FactoredSymmetric(self.basis(), self.spectrum)


def _reflect(X: np.ndarray, u: Optional[np.ndarray]) -> np.ndarray:
    """``(I - 2uu^T) X (I - 2uu^T)`` for symmetric ``X`` in O(n^2)."""
    if u is None:
        return X
    w = X @ u
    c = float(u @ w)
    out = X - 2.0 * np.outer(u, w) - 2.0 * np.outer(w, u) + 4.0 * c * np.outer(u, u)
    return 0.5 * (out + out.T)


def _b_chain(state: SHFState) -> List[np.ndarray]:
    """All ``B_k`` for ``k = 0..h`` (``B_h = diag(sbar)``)."""
    h = state.h
    Bs: List[np.ndarray] = [None] * (h + 1)  # type: ignore[list-item]
    Bs[h] = np.diag(state.spectrum)
    for k in range(h - 1, -1, -1):
        Bs[k] = _reflect(Bs[k + 1], state.vectors[k])
    return Bs


def build_AB(state: SHFState, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Work matrices ``(A_k, B_k)`` for reflector ``k`` (1-based).

    ``k = 0`` returns ``(S, B_0)`` where ``B_0`` sandwiches ``diag(sbar)``
    between all reflectors and carries no ``D``.
    """
    if not 0 <= k <= state.h:
        raise IndexError(f"k must lie in [0, {state.h}], got {k}")
    B = np.diag(state.spectrum)
    for j in range(state.h - 1, k - 1, -1):
        B = _reflect(B, state.vectors[j])
    if k == 0:
        return state.S.copy(), B
    d = state.signs
    A = state.S * np.outer(d, d)
    for j in range(k - 1):
        A = _reflect(A, state.vectors[j])
    return A, B


def _check_unit(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if abs(np.linalg.norm(u) - 1.0) > 1e-9:
        raise ValueError("u must be a unit vector")
    return u


def cost_C(A: np.ndarray, B: np.ndarray, u: np.ndarray) -> float:
    u = _check_unit(u)
    Au, Bu = A @ u, B @ u
    return float(2.0 * (Au @ Bu) - 2.0 * (u @ Au) * (u @ Bu))


def grad_C(A: np.ndarray, B: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Euclidean gradient ``2(AB + BA)u - 4((u^T A u) B + (u^T B u) A) u``."""
    u = np.asarray(u, dtype=np.float64)
    Au, Bu = A @ u, B @ u
    return 2.0 * (A @ Bu + B @ Au) - 4.0 * ((u @ Au) * Bu + (u @ Bu) * Au)


def _canonical_sign(u: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(np.abs(u) > 1e-12)
    if idx.size and u[idx[0]] < 0:
        return -u
    return u


def u_dagger(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Minimizer of ``u^T (AB + BA) u``: eigenvector of its lowest eigenvalue."""
    M = A @ B
    _, V = np.linalg.eigh(M + M.T)
    return _canonical_sign(V[:, 0].copy())


def _quartic(A: np.ndarray, B: np.ndarray, u: np.ndarray) -> float:
    return float((u @ A @ u) * (u @ B @ u))


class _PlaneQuartic:
    """``(u^T A u)(u^T B u)`` restricted to ``p a + q b``."""

    def __init__(self, A: np.ndarray, B: np.ndarray, a: np.ndarray, b: np.ndarray):
        Aa, Ab, Ba, Bb = A @ a, A @ b, B @ a, B @ b
        self.A = (a @ Aa, a @ Ab, b @ Ab)
        self.B = (a @ Ba, a @ Bb, b @ Bb)

    def __call__(self, p, q):
        return _PlaneCost._form(self.A, p, q) * _PlaneCost._form(self.B, p, q)


def _quartic_ascent(
    A: np.ndarray, B: np.ndarray, u: np.ndarray, max_iter: int = 100, tol: float = 1e-9
) -> np.ndarray:
    """Sphere ascent on ``(u^T A u)(u^T B u)``; never lowers it."""
    q = _quartic(A, B, u)
    scale = max(np.linalg.norm(A) * np.linalg.norm(B), 1e-300)
    for _ in range(max_iter):
        Au, Bu = A @ u, B @ u
        g = (u @ Bu) * Au + (u @ Au) * Bu
        g -= (u @ g) * u
        ng = np.linalg.norm(g)
        if ng < 1e-12:
            break
        g /= ng
        pq = _PlaneQuartic(A, B, u, g)

        def f(gm):
            p, r = _arc_scalar(gm)
            return -float(pq(p, r))

        def f_grid(gs):
            p, r = _arc(gs)
            return -pq(p, r)

        gamma, _ = bounded_minimize(f, 0.0, SQRT2, tol=1e-6, f_grid=f_grid)
        p, r = _arc(gamma)
        u_new = p * u + r * g
        u_new /= np.linalg.norm(u_new)
        q_new = _quartic(A, B, u_new)
        if not q_new > q:
            break
        gain = q_new - q
        u, q = u_new, q_new
        if gain < tol * scale:
            break
    return u


def u_ddagger(A: np.ndarray, B: np.ndarray, polish: bool = True) -> np.ndarray:
    """Candidate maximizing ``(u^T A u)(u^T B u)``.

    The top eigenvector of ``B kron A`` is ``v_B kron v_A`` for the extreme
    eigenpairs whose eigenvalue product is largest; it is never formed.
    Reshaped, it is the rank-one ``V = v_A v_B^T`` and the candidate is the
    top eigenvector of ``(V + V^T) / 2``, i.e. ``v_A + v_B`` or
    ``v_A - v_B`` normalized. Eigenvector signs are arbitrary, so both are
    formed and the one with the larger quartic term is kept.

    That rank-one answer is only a heuristic for the quartic maximum. With
    ``polish=True`` every extreme-pair candidate is also pushed uphill by a
    sphere ascent and the best end point is returned.
    """
    wa, Va = np.linalg.eigh(A)
    wb, Vb = np.linalg.eigh(B)
    ia_max, ia_min = int(np.argmax(wa)), int(np.argmin(wa))
    ib_max, ib_min = int(np.argmax(wb)), int(np.argmin(wb))
    pairs = [(ia_max, ib_max), (ia_max, ib_min), (ia_min, ib_max), (ia_min, ib_min)]
    best = None
    for ia, ib in pairs:
        val = wa[ia] * wb[ib]
        if best is None or val > best[0]:
            best = (val, ia, ib)

    def rank_one(ia, ib):
        va, vb = Va[:, ia], Vb[:, ib]
        cands = []
        for s in (1.0, -1.0):
            w = va + s * vb
            nw = np.linalg.norm(w)
            if nw > 1e-8:
                cands.append(w / nw)
        if not cands:
            return va.copy()
        return max(cands, key=lambda c: _quartic(A, B, c))

    u = rank_one(best[1], best[2])
    if polish:
        starts = [u] + [rank_one(ia, ib) for ia, ib in pairs if (ia, ib) != best[1:]]
        ends = [_quartic_ascent(A, B, s) for s in starts]
        u = ends[int(np.argmax([_quartic(A, B, e) for e in ends]))]
    return _canonical_sign(u)


def rayleigh_init(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Quartic-term candidate through the Cholesky change of variables.

    With ``B = L L^T`` and ``y = L^T x`` the top eigenvector of
    ``L^T A L^{-T}`` is mapped back by ``x = L^{-T} y``. ``L^T A L^{-T}`` is
    similar to ``A``, so ``x`` is an eigenvector of ``A`` for its largest
    eigenvalue.
    """
    try:
        L = np.linalg.cholesky(B)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("B is not positive definite") from exc
    # A L^{-T} = (L^{-1} A)^T for symmetric A
    K = L.T @ scipy.linalg.solve_triangular(L, A, lower=True).T
    w, Y = scipy.linalg.eig(K)
    y = np.real(Y[:, int(np.argmax(np.real(w)))])
    x = scipy.linalg.solve_triangular(L.T, y, lower=False)
    return _canonical_sign(x / np.linalg.norm(x))


def _is_pd(X: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return False
    return True


class _PlaneCost:
    """``C`` restricted to unit vectors ``p a + q b`` with ``a ⟂ b`` unit."""

    def __init__(self, A: np.ndarray, B: np.ndarray, a: np.ndarray, b: np.ndarray):
        Aa, Ab, Ba, Bb = A @ a, A @ b, B @ a, B @ b
        self.A = (a @ Aa, a @ Ab, b @ Ab)
        self.B = (a @ Ba, a @ Bb, b @ Bb)
        # u^T (AB + BA) u = 2 (Au) . (Bu)
        self.M = (2.0 * (Aa @ Ba), (Aa @ Bb) + (Ab @ Ba), 2.0 * (Ab @ Bb))

    @staticmethod
    def _form(m, p, q):
        return p * p * m[0] + 2.0 * p * q * m[1] + q * q * m[2]

    def __call__(self, p, q):
        return self._form(self.M, p, q) - 2.0 * self._form(self.A, p, q) * self._form(self.B, p, q)


def _noise(A: np.ndarray, B: np.ndarray) -> float:
    """Cost changes below this are rounding noise."""
    return 1e-14 * np.linalg.norm(A) * np.linalg.norm(B)


def _arc_scalar(gamma: float) -> Tuple[float, float]:
    g2 = gamma * gamma
    return 1.0 - 0.5 * g2, math.sqrt(max(g2 - 0.25 * g2 * g2, 0.0))


def _arc(gamma):
    """Coefficients ``(1 - g^2/2, sqrt(g^2 - g^4/4))`` of the unit arc."""
    if isinstance(gamma, float):
        return _arc_scalar(gamma)
    g2 = np.square(gamma)
    return 1.0 - 0.5 * g2, np.sqrt(np.maximum(g2 - 0.25 * g2 * g2, 0.0))


def _arc_search(pc: _PlaneCost, sign: float, tol: float) -> Tuple[float, float]:
    def f(g):
        p, q = _arc_scalar(g)
        return float(pc(p, sign * q))

    def f_grid(gs):
        p, q = _arc(gs)
        return pc(p, sign * q)

    return bounded_minimize(f, 0.0, SQRT2, tol=tol, f_grid=f_grid)


def combine_init(
    u_dag: np.ndarray,
    u_ddag: np.ndarray,
    A: np.ndarray,
    B: np.ndarray,
    line_tol: float = 1e-6,
) -> np.ndarray:
    """Best point on the great circle through ``u_dag`` and ``u_ddag``.

    ``u_ddag`` is first orthogonalized against ``u_dag``; then ``C`` is
    minimized over ``(1 - g^2/2) u_dag +- sqrt(g^2 - g^4/4) u_ddag`` for
    ``g`` in ``[0, sqrt(2)]`` on both branches. ``g = 0`` is always a
    candidate, so the result never costs more than ``u_dag``.
    """
    a = np.asarray(u_dag, dtype=np.float64)
    b = np.asarray(u_ddag, dtype=np.float64) - (a @ u_ddag) * a
    nb = np.linalg.norm(b)
    if nb < 1e-10:
        return a.copy()
    b = b / nb
    pc = _PlaneCost(A, B, a, b)
    best_g, best_c, best_s = 0.0, float(pc(1.0, 0.0)), 1.0
    noise = _noise(A, B)
    for sign in (1.0, -1.0):
        g, c = _arc_search(pc, sign, line_tol)
        if c < best_c - noise:
            best_g, best_c, best_s = g, c, sign
    p, q = _arc(best_g)
    u = p * a + best_s * q * b
    return u / np.linalg.norm(u)


def refine_reflector(
    A: np.ndarray,
    B: np.ndarray,
    u_init: np.ndarray,
    cfg: Optional[SHFConfig] = None,
    trace: Optional[List[float]] = None,
) -> np.ndarray:
    """Descend ``C`` on the unit sphere from ``u_init``.

    Each step moves along the normalized tangential gradient ``g`` on the
    arc ``(1 - g^2/2) u - sqrt(g^2 - g^4/4) g`` with the step found by a
    bounded 1-D search; ``g = 0`` is a candidate, so ``C`` never increases.
    Stops when a step gains less than ``line_tol * ||A||_F ||B||_F`` or
    after ``inner_max`` steps. Costs are appended to ``trace`` if given.
    """
    inner_max = cfg.inner_max if cfg is not None else 200
    line_tol = cfg.line_tol if cfg is not None else 1e-6
    u = np.asarray(u_init, dtype=np.float64).copy()
    u /= np.linalg.norm(u)
    scale = max(np.linalg.norm(A) * np.linalg.norm(B), 1e-300)
    noise = _noise(A, B)
    c = cost_C(A, B, u)
    if trace is not None:
        trace.append(c)
    for _ in range(inner_max):
        g = grad_C(A, B, u)
        g -= (u @ g) * u
        ng = np.linalg.norm(g)
        if ng < 1e-12:
            break
        g /= ng
        pc = _PlaneCost(A, B, u, g)
        gamma, c_new = _arc_search(pc, -1.0, line_tol)
        if not c_new < c:
            break
        p, q = _arc(gamma)
        u_new = p * u - q * g
        u_new /= np.linalg.norm(u_new)
        c_exact = cost_C(A, B, u_new)
        if not c_exact < c - noise:
            break
        gain = c - c_exact
        u, c = u_new, c_exact
        if trace is not None:
            trace.append(c)
        if gain < line_tol * scale:
            break
    return u


def update_diagonal(
    S: np.ndarray,
    B0: np.ndarray,
    incumbent: Optional[np.ndarray] = None,
    exhaustive_max: int = 12,
) -> np.ndarray:
    """Fit the sign diagonal ``d`` to minimize ``||S - D B0 D||_F``.

    Starts from the row rule ``d_i = +1 if ||s_i - b_i|| >= ||s_i + b_i||``
    (rows with their diagonal entry removed), keeps the incumbent instead if
    that is strictly better, and finishes with exact single-sign flips
    until none lowers the error. The result is never worse than the
    incumbent.

    For ``n <= exhaustive_max`` all sign patterns are also scored and the
    best one replaces the result when it is strictly better, so small
    problems are solved exactly.
    """
    S = np.asarray(S, dtype=np.float64)
    B0 = np.asarray(B0, dtype=np.float64)
    n = S.shape[0]
    off = ~np.eye(n, dtype=bool)
    s_off = np.where(off, S, 0.0)
    b_off = np.where(off, B0, 0.0)
    minus = np.linalg.norm(s_off - b_off, axis=1)
    plus = np.linalg.norm(s_off + b_off, axis=1)
    d = np.where(minus >= plus, 1.0, -1.0)

    # ||S - D B0 D||^2 = const - 2 d^T W d with W = S o B0 off the diagonal
    W = s_off * b_off
    if incumbent is not None:
        inc = np.asarray(incumbent, dtype=np.float64)
        if inc @ W @ inc > d @ W @ d:
            d = inc.copy()
    field_ = W @ d
    for _ in range(10 * n * n):
        gains = -d * field_
        i = int(np.argmax(gains))
        if gains[i] <= 1e-15 * (np.abs(W).sum() + 1e-300):
            break
        d[i] = -d[i]
        field_ += 2.0 * d[i] * W[:, i]
    if 1 < n <= exhaustive_max:
        # d and -d score alike, so d_0 = +1 covers every pattern
        bits = (np.arange(2 ** (n - 1))[:, None] >> np.arange(n - 1)) & 1
        P = np.hstack([np.ones((bits.shape[0], 1)), 1.0 - 2.0 * bits])
        scores = np.einsum("ij,jk,ik->i", P, W, P)
        j = int(np.argmax(scores))
        cur = d @ W @ d
        if scores[j] - cur > 1e-12 * (abs(cur) + np.abs(W).sum() + 1e-300):
            d = P[j].copy()
    return d


def update_spectrum(S: np.ndarray, basis: ReflectorProduct) -> np.ndarray:
    """``diag(Ubar^T S Ubar)``, the optimal spectrum for a fixed basis."""
    UtS = apply_transpose(basis, S)
    return np.diag(apply_transpose(basis, UtS.T)).copy()


def spectrum_order(s: np.ndarray) -> np.ndarray:
    """Indices sorting eigenvalues by descending magnitude (stable)."""
    return np.argsort(-np.abs(s), kind="stable")


def _check_symmetric(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("matrix must be finite")
    if np.linalg.norm(S - S.T) > 1e-8 * max(np.linalg.norm(S), 1e-300):
        raise ValueError("matrix is not symmetric")
    return 0.5 * (S + S.T)


def partial_eig_baseline(S: np.ndarray, h: int) -> Tuple[FactoredSymmetric, ApproxReport]:
    """First ``h`` Householder steps of an eigenvalue diagonalization.

    Eigenvectors are taken by descending ``|eigenvalue|``; ``J_k`` maps the
    current image of the ``k``-th one onto ``+-e_k``. Then
    ``J_h..J_1 S J_1..J_h = [[Lambda, 0], [0, St]]`` and the spectrum is
    ``(lambda_1..lambda_h, diag(St))``, leaving exactly the off-diagonal
    energy of ``St`` as error. The predicted error reported is that
    off-diagonal energy.
    """
    S = _check_symmetric(S)
    n = S.shape[0]
    if not 0 <= h <= n:
        raise ValueError(f"h must lie in [0, {n}], got {h}")
    s, W = np.linalg.eigh(S)
    order = spectrum_order(s)
    s, W = s[order], W[:, order]
    X = W.copy()
    T = S.copy()
    js: List[Optional[np.ndarray]] = []
    for k in range(h):
        x = X[:, k]
        if np.linalg.norm(x[k + 1:]) <= 1e-15:
            js.append(None)
            continue
        v = np.zeros(n)
        v[k:] = x[k:]
        v[k] += math.copysign(np.linalg.norm(x[k:]), x[k])
        v /= np.linalg.norm(v)
        X -= 2.0 * np.outer(v, v @ X)
        T = _reflect(T, v)
        js.append(v)
    trailing = T[h:, h:]
    spectrum = np.concatenate([s[:h], np.diag(trailing)])
    state = SHFState(S=S, vectors=js, signs=np.ones(n), spectrum=spectrum)
    f = state.factor()
    predicted = float(np.sum(trailing**2) - np.sum(np.diag(trailing) ** 2))
    Sbar = to_dense(f)
    report = ApproxReport(
        measured_error=squared_error(S, Sbar),
        normalized_error=relative_error(S, Sbar),
        predicted_error=predicted,
    )
    return f, report


def _objective(state: SHFState) -> float:
    Sbar = to_dense(state.factor())
    return relative_error(state.S, Sbar)


def _ddagger_candidates(A: np.ndarray, B: np.ndarray, mode: str) -> List[np.ndarray]:
    cands = []
    if mode in ("auto", "kron"):
        cands.append(u_ddagger(A, B))
    if mode in ("auto", "rayleigh") and _is_pd(A) and _is_pd(B):
        cands.append(rayleigh_init(A, B))
    if not cands:
        cands.append(u_ddagger(A, B))
    return cands


def _fresh_reflector(A: np.ndarray, B: np.ndarray, cfg: SHFConfig) -> Tuple[np.ndarray, float]:
    ud = u_dagger(A, B)
    best_u, best_c = None, np.inf
    for cand in _ddagger_candidates(A, B, cfg.ddagger):
        u = combine_init(ud, cand, A, B, cfg.line_tol)
        c = cost_C(A, B, u)
        if c < best_c:
            best_u, best_c = u, c
    return best_u, best_c


def _accepts(c: float, A: np.ndarray, B: np.ndarray) -> bool:
    # an identity slot has C = 0; only take a reflector that strictly helps
    return c < -1e-13 * np.linalg.norm(A) * np.linalg.norm(B)


def _sweep(state: SHFState, cfg: SHFConfig, refine: bool) -> None:
    Bs = _b_chain(state)
    d = state.signs
    A = state.S * np.outer(d, d)
    for k in range(state.h):
        B = Bs[k + 1]
        u = state.vectors[k]
        if u is None:
            cand, c = _fresh_reflector(A, B, cfg)
            if _accepts(c, A, B):
                u = cand
        if u is not None and refine:
            u = refine_reflector(A, B, u, cfg)
            if not _accepts(cost_C(A, B, u), A, B):
                u = None
        state.vectors[k] = u
        A = _reflect(A, u)


def _refit_signs(state: SHFState) -> None:
    _, B0 = build_AB(state, 0)
    state.signs = update_diagonal(state.S, B0, incumbent=state.signs)


def shf(S: np.ndarray, cfg: SHFConfig) -> Tuple[FactoredSymmetric, ApproxReport]:
    """Symmetric Householder factorization of ``S`` with ``cfg.h`` reflectors.

    The report's ``trace`` lists the normalized error after initialization
    and after every outer iteration.
    """
    S = _check_symmetric(S)
    n = S.shape[0]
    if np.linalg.norm(S) == 0.0:
        raise ValueError("matrix must be nonzero")
    h = cfg.h
    s = np.linalg.eigvalsh(S)
    s = s[spectrum_order(s)]

    if cfg.init_mode == "baseline" and h <= n:
        f0, _ = partial_eig_baseline(S, h)
        vecs = [u.copy() for u in f0.basis.vectors[::-1]]
        vecs += [None] * (h - len(vecs))
        state = SHFState(S=S, vectors=vecs, signs=np.ones(n), spectrum=f0.spectrum.copy())
    else:
        state = SHFState(S=S, vectors=[None] * h, signs=np.ones(n), spectrum=s.copy())
        _sweep(state, cfg, refine=False)
    _refit_signs(state)
    state.trace.append(_objective(state))

    iterations = 0
    for _ in range(cfg.max_outer):
        iterations += 1
        _sweep(state, cfg, refine=True)
        _refit_signs(state)
        if cfg.spectrum_update and cfg.spectrum_each_iteration:
            state.spectrum = update_spectrum(S, state.basis())
        eps = _objective(state)
        prev = state.trace[-1]
        state.trace.append(eps)
        if prev - eps < cfg.outer_tol:
            break
    if cfg.spectrum_update and not cfg.spectrum_each_iteration:
        state.spectrum = update_spectrum(S, state.basis())
        state.trace.append(_objective(state))

    f = state.factor()
    Sbar = to_dense(f)
    report = ApproxReport(
        measured_error=squared_error(S, Sbar),
        normalized_error=relative_error(S, Sbar),
        trace=list(state.trace),
        iterations=iterations,
    )
    return f, report
