"""Bounded scalar minimization by golden-section search."""
from __future__ import annotations

import math
from typing import Callable, Optional, Tuple

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-6,
    max_iter: int = 200,
) -> Tuple[float, float]:
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol and it < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        it += 1
    return (c, fc) if fc <= fd else (d, fd)


def bounded_minimize(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-6,
    grid: int = 24,
    f_grid: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> Tuple[float, float]:
    """Global-ish minimization on ``[lo, hi]``.

    A uniform grid (which includes ``lo``) picks the best bracket, then
    golden-section refines inside it. The returned value is never worse
    than ``f(lo)``. ``f_grid`` is an optional vectorized version of ``f``.
    """
    xs = np.linspace(lo, hi, grid + 1)
    fs = f_grid(xs) if f_grid is not None else np.array([f(x) for x in xs])
    i = int(np.argmin(fs))
    best_x, best_f = float(xs[i]), float(fs[i])
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, grid)]
    x, fx = golden_section(f, float(a), float(b), tol)
    if fx < best_f:
        best_x, best_f = x, fx
    return best_x, best_f
