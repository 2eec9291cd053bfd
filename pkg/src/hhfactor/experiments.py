"""Monte-Carlo sweeps, bound checks, apply benchmarks and the metric demo.

Sweeps write CSV with floats at 17 significant digits. Realization ``i``
uses seed ``base_seed + i`` and owns its own generator, so output is
byte-identical for a fixed ``SweepSpec`` whether or not a process pool is used.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .ensembles import random_orthonormal, random_symmetric, rng_for
from .metric import (
    MetricModel,
    knn_classify,
    load_csv,
    make_blobs,
    project_metric,
    split,
    train_dense,
    train_projected,
)
from .ortho import approximate_orthonormal, expected_bound_ortho
from .reflectors import (
    FactoredSymmetric,
    FlopCounter,
    ReflectorProduct,
    apply,
    apply_symmetric,
    to_dense,
)
from .symmetric import SHFConfig, partial_eig_baseline, shf

__all__ = [
    "SweepSpec",
    "ORTHO_SWEEP_METHODS",
    "SYM_METHODS",
    "run_ortho_sweep",
    "run_sym_sweep",
    "run_bounds",
    "run_bench",
    "run_metric_demo",
    "fmt",
]

ORTHO_SWEEP_METHODS = ("constrained", "unconstrained", "unconstrained-d", "qr-baseline", "best")
SYM_METHODS = ("shf", "shf-su", "eig-baseline")
EXPERIMENTS = ("ortho", "sym", "bounds", "bench", "metric")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


@dataclass
class SweepSpec:
    """Description of one experiment run.

    ``h_values`` defaults to the single value ``h_min`` when ``h_max`` is
    ``None``. ``workers > 1`` distributes realizations over processes.
    """

    experiment: str
    n: int
    h_min: int = 0
    h_max: Optional[int] = None
    methods: Tuple[str, ...] = ()
    ensemble: str = "indefinite"
    seeds: int = 1
    base_seed: int = 0
    out: Optional[str] = None
    iters: int = 100
    trace: Optional[str] = None
    workers: int = 1
    h_step: int = 1
    extra: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.seeds < 1:
            raise ValueError("seeds must be at least 1")
        if self.h_min < 0:
            raise ValueError("h must be nonnegative")
        if self.h_max is not None and self.h_max < self.h_min:
            raise ValueError("empty h range")
        if self.h_step < 1:
            raise ValueError("h step must be positive")
        if self.iters < 0:
            raise ValueError("iters must be nonnegative")
        self.methods = tuple(self.methods)

    @property
    def h_values(self) -> List[int]:
        hi = self.h_min if self.h_max is None else self.h_max
        return list(range(self.h_min, hi + 1, self.h_step))

    @property
    def seed_values(self) -> List[int]:
        return [self.base_seed + i for i in range(self.seeds)]


def _map(fn: Callable, tasks: Sequence, workers: int) -> List:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _emit(header: Sequence[str], rows: Iterable[Sequence], out: Optional[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text


def _mean_rows(rows: List[list], key_cols: Sequence[int], val_cols: Sequence[int], width: int):
    groups: Dict[tuple, List[list]] = {}
    for r in rows:
        groups.setdefault(tuple(r[i] for i in key_cols), []).append(r)
    out = []
    for key, grp in groups.items():
        row: List[object] = [None] * width
        for i, k in zip(key_cols, key):
            row[i] = k
        for i in val_cols:
            vals = [g[i] for g in grp if g[i] is not None]
            row[i] = float(np.mean(vals)) if vals else None
        out.append(row)
    return out


# ---- orthonormal sweep ----

ORTHO_HEADER = ("n", "h", "seed", "method", "normalized_error", "predicted_error", "measured_error")


def _ortho_task(args):
    n, seed, hs, methods = args
    U = random_orthonormal(n, seed)
    rows = []
    for h in hs:
        for m in methods:
            _, r = approximate_orthonormal(U, h, m)
            rows.append([n, h, seed, m, r.normalized_error, r.predicted_error, r.measured_error])
    return rows


def run_ortho_sweep(spec: SweepSpec) -> str:
    """Errors of the orthonormal approximations on Haar-random matrices.

    One row per (h, seed, method), then one ``seed=mean`` row per
    (h, method).
    """
    methods = spec.methods or ("constrained", "unconstrained")
    bad = [m for m in methods if m not in ORTHO_SWEEP_METHODS]
    if bad:
        raise ValueError(f"unknown ortho method(s) {bad}; expected {ORTHO_SWEEP_METHODS}")
    if spec.h_values[-1] > spec.n:
        raise ValueError(f"h must not exceed n={spec.n}")
    tasks = [(spec.n, s, spec.h_values, methods) for s in spec.seed_values]
    rows = [r for chunk in _map(_ortho_task, tasks, spec.workers) for r in chunk]
    rows.sort(key=lambda r: (r[1], methods.index(r[3])))
    means = _mean_rows(rows, (0, 1, 3), (4, 5, 6), len(ORTHO_HEADER))
    for m in means:
        m[2] = "mean"
    return _emit(ORTHO_HEADER, rows + means, spec.out)


# ---- symmetric sweep ----

SYM_HEADER = ("n", "h", "seed", "ensemble", "method", "normalized_error", "iterations")
TRACE_HEADER = ("n", "h", "seed", "ensemble", "method", "iteration", "normalized_error")


def _sym_task(args):
    n, seed, hs, methods, ensemble, iters = args
    S = random_symmetric(n, seed, ensemble)
    rows, traces = [], []
    for h in hs:
        for m in methods:
            if m == "eig-baseline":
                _, r = partial_eig_baseline(S, h)
            else:
                # the spectrum-update variant starts from the baseline so it
                # can never do worse than it
                cfg = SHFConfig(
                    h=h,
                    max_outer=iters,
                    spectrum_update=(m == "shf-su"),
                    init_mode="baseline" if m == "shf-su" else "paper",
                )
                _, r = shf(S, cfg)
            rows.append([n, h, seed, ensemble, m, r.normalized_error, r.iterations])
            for i, e in enumerate(r.trace):
                traces.append([n, h, seed, ensemble, m, i, e])
    return rows, traces


def run_sym_sweep(spec: SweepSpec) -> str:
    """SHF, SHF with spectrum update, and the partial-eigendecomposition baseline."""
    methods = spec.methods or SYM_METHODS
    bad = [m for m in methods if m not in SYM_METHODS]
    if bad:
        raise ValueError(f"unknown sym method(s) {bad}; expected {SYM_METHODS}")
    if spec.ensemble not in ("indefinite", "posdef"):
        raise ValueError(f"unknown ensemble {spec.ensemble!r}")
    if spec.h_values[-1] > spec.n:
        raise ValueError(f"h must not exceed n={spec.n}")
    tasks = [
        (spec.n, s, spec.h_values, methods, spec.ensemble, spec.iters) for s in spec.seed_values
    ]
    results = _map(_sym_task, tasks, spec.workers)
    rows = [r for chunk, _ in results for r in chunk]
    rows.sort(key=lambda r: (r[1], methods.index(r[4])))
    means = _mean_rows(rows, (0, 1, 3, 4), (5, 6), len(SYM_HEADER))
    for m in means:
        m[2] = "mean"
    if spec.trace is not None:
        trace_rows = [t for _, chunk in results for t in chunk]
        _emit(TRACE_HEADER, trace_rows, spec.trace)
    return _emit(SYM_HEADER, rows + means, spec.out)


# ---- bounds ----

BOUNDS_HEADER = ("kind", "n", "h", "seeds", "bound", "mean", "stderr", "within", "max_identity_gap")


def _bound_ortho_task(args):
    n, seed, hs, method = args
    U = random_orthonormal(n, seed)
    return [approximate_orthonormal(U, h, method)[1].measured_error for h in hs]


def _bound_sym_task(args):
    n, seed, hs, ensemble = args
    S = random_symmetric(n, seed, ensemble)
    sigma2 = np.sort(np.linalg.eigvalsh(S) ** 2)[::-1]
    out = []
    for h in hs:
        _, r = partial_eig_baseline(S, h)
        out.append((r.measured_error, float(sigma2[h:].sum()), abs(r.measured_error - r.predicted_error)))
    return out


def run_bounds(spec: SweepSpec) -> str:
    """Monte-Carlo means against the closed-form bounds.

    ``ortho`` rows compare ``||U - Ubar||_F^2`` (method ``best`` unless one
    is given) with the expected partial-QR error; ``within`` reports
    ``mean <= bound + 2 stderr``. ``sym`` rows compare the
    partial-eigendecomposition error with the low-rank error
    ``sum_{i>h} sigma_i^2`` averaged over seeds, and report the largest
    per-seed gap between measured error and the trailing-block identity.
    """
    kind = str(spec.extra.get("kind", "ortho"))
    seeds = spec.seed_values
    rows = []
    if kind == "ortho":
        if spec.h_values[-1] > spec.n:
            raise ValueError(f"h must not exceed n={spec.n}")
        method = spec.methods[0] if spec.methods else "best"
        res = np.array(_map(_bound_ortho_task, [(spec.n, s, spec.h_values, method) for s in seeds], spec.workers))
        for j, h in enumerate(spec.h_values):
            col = res[:, j]
            mean = float(col.mean())
            se = float(col.std(ddof=1) / math.sqrt(len(col))) if len(col) > 1 else 0.0
            bound = expected_bound_ortho(spec.n, h)
            rows.append(["ortho", spec.n, h, len(col), bound, mean, se, int(mean <= bound + 2 * se), None])
    elif kind == "sym":
        if spec.h_values[-1] > spec.n:
            raise ValueError(f"h must not exceed n={spec.n}")
        res = _map(_bound_sym_task, [(spec.n, s, spec.h_values, spec.ensemble) for s in seeds], spec.workers)
        for j, h in enumerate(spec.h_values):
            errs = np.array([r[j][0] for r in res])
            lowrank = np.array([r[j][1] for r in res])
            gap = max(r[j][2] for r in res)
            mean = float(errs.mean())
            se = float(errs.std(ddof=1) / math.sqrt(len(errs))) if len(errs) > 1 else 0.0
            bound = float(lowrank.mean())
            rows.append(["sym", spec.n, h, len(errs), bound, mean, se, int(mean <= bound + 2 * se), gap])
    else:
        raise ValueError(f"unknown bounds kind {kind!r}")
    return _emit(BOUNDS_HEADER, rows, spec.out)


# ---- benchmark ----

BENCH_HEADER = (
    "operator", "n", "h", "dense_flops", "factored_flops", "flop_ratio",
    "expected_ratio", "ratio_ok", "dense_seconds", "factored_seconds", "max_abs_diff",
)


def _best_time(fn: Callable[[], object], repeat: int = 5) -> float:
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_bench(spec: SweepSpec) -> str:
    """Dense against factored apply for random unit reflectors.

    Dense apply is counted as ``2n^2`` flops per vector. Orthonormal rows
    check the counted ratio against ``2n^2 / (4nh)`` within 20%; symmetric
    rows check the factored count against ``1.2 (8h + 1) n``.
    """
    n = spec.n
    rows = []
    for h in spec.h_values:
        if h < 1:
            raise ValueError("benchmark needs h >= 1")
        rng = rng_for(spec.base_seed)
        V = rng.standard_normal((h, n))
        signs = np.where(rng.standard_normal(n) >= 0, 1.0, -1.0)
        p = ReflectorProduct.from_vectors(V, signs)
        f = FactoredSymmetric(p, rng.standard_normal(n))
        x = rng.standard_normal(n)
        for name, obj, fast in (("orthonormal", p, apply), ("symmetric", f, apply_symmetric)):
            M = to_dense(obj)
            c = FlopCounter()
            y = fast(obj, x, c)
            diff = float(np.max(np.abs(M @ x - y)))
            dense_flops = 2 * n * n
            ratio = dense_flops / c.flops
            if name == "orthonormal":
                expected = dense_flops / (4 * n * h)
                ok = abs(ratio - expected) <= 0.2 * expected
            else:
                expected = dense_flops / ((8 * h + 1) * n)
                ok = c.flops <= 1.2 * (8 * h + 1) * n
            td = _best_time(lambda: M @ x)
            tf = _best_time(lambda: fast(obj, x))
            rows.append([name, n, h, dense_flops, c.flops, ratio, expected, int(ok), td, tf, diff])
    return _emit(BENCH_HEADER, rows, spec.out)


# ---- metric demo ----

METRIC_HEADER = (
    "seed", "h", "euclidean_accuracy", "dense_accuracy", "projected_accuracy",
    "projection_error", "prediction_agreement_exact",
)


def _metric_task(args):
    seed, h, iters, dataset_path, header, n_points, dim = args
    if dataset_path is None:
        data = make_blobs(n_points=n_points, dim=dim, seed=seed)
    else:
        data = load_csv(dataset_path, header=header)
    train, test = split(data, 0.3, seed)
    _, acc_e = knn_classify(MetricModel.identity(data.n), train, test)
    dense = train_dense(train, iters)
    pred_d, acc_d = knn_classify(dense, train, test)
    proj = train_projected(train, h, iters)
    _, acc_p = knn_classify(proj, train, test)
    exact = project_metric(dense, max(data.n - 1, 0))
    pred_x, _ = knn_classify(exact, train, test)
    return [seed, h, acc_e, acc_d, acc_p, proj.projection_error, float(np.mean(pred_x == pred_d))]


def run_metric_demo(spec: SweepSpec) -> str:
    """Dense vs projected metric learning, evaluated by 3-NN accuracy.

    Uses seeded Gaussian blobs (``spec.n`` dimensions, ``extra['points']``
    points, default 600) or a CSV file given as ``extra['data']``. The last
    column reports how often an exact factorization of the dense metric
    predicts the same labels as the dense metric.
    """
    h = spec.h_values[0]
    path = spec.extra.get("data")
    header = bool(spec.extra.get("header", False))
    n_points = int(spec.extra.get("points", 600))
    tasks = [(s, h, max(spec.iters, 2), path, header, n_points, spec.n) for s in spec.seed_values]
    rows = _map(_metric_task, tasks, spec.workers)
    means = _mean_rows(rows, (1,), (2, 3, 4, 5, 6), len(METRIC_HEADER))
    for m in means:
        m[0] = "mean"
    return _emit(METRIC_HEADER, rows + means, spec.out)
