"""Mahalanobis metric learning with projection onto a reflector-factored metric.

The learner is a small large-margin nearest-neighbor variant. Every point
has ``k_target`` same-class target neighbors fixed at the start; the loss is

    sum_{i, j in T(i)} d(i, j)
      + mu * sum_{i, j in T(i), l : y_l != y_i} [margin + d(i, j) - d(i, l)]_+

with ``d(p, q) = (x_p - x_q)^T S (x_p - x_q)``, averaged over target pairs.
Steps are projected gradient steps on ``S`` with backtracking. A learned
metric can be projected onto ``Ubar diag(s) Ubar^T`` with ``h`` reflectors,
after which a point is transformed in ``O(nh)`` instead of ``O(n^2)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .ensembles import rng_for
from .reflectors import FactoredSymmetric, FlopCounter, apply_transpose, relative_error, to_dense
from .symmetric import SHFConfig, shf

__all__ = [
    "Dataset",
    "MetricModel",
    "make_blobs",
    "load_csv",
    "split",
    "pca_reduce",
    "target_neighbors",
    "lmnn_loss",
    "lmnn_gradient",
    "lmnn_step",
    "project_metric",
    "train_dense",
    "train_projected",
    "knn_classify",
]

PSD_FLOOR = -1e-9


@dataclass(frozen=True)
class Dataset:
    """Labelled points, one per row."""

    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        X = np.asarray(self.points, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise ValueError("points must be a 2-D array")
        if y.shape != (X.shape[0],):
            raise ValueError("need exactly one label per point")
        if not np.all(np.isfinite(X)):
            raise ValueError("points must be finite")
        if not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise ValueError("labels must be integers")
            y = y.astype(np.int64)
        if np.unique(y).size < 2:
            raise ValueError("at least two classes are required")
        object.__setattr__(self, "points", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


def make_blobs(
    n_points: int = 600,
    dim: int = 10,
    n_classes: int = 3,
    separation: float = 3.0,
    informative: int = 2,
    noise_scale: float = 3.0,
    seed: int = 0,
) -> Dataset:
    """Gaussian blobs whose centers differ only in ``informative`` coordinates.

    The remaining coordinates carry isotropic noise with standard deviation
    ``noise_scale``, so a learned metric that suppresses them beats the
    Euclidean one. The whole cloud is then rotated at random.
    """
    if not 1 <= informative <= dim:
        raise ValueError("informative must lie in [1, dim]")
    rng = rng_for(seed)
    centers = np.zeros((n_classes, dim))
    centers[:, :informative] = separation * rng.standard_normal((n_classes, informative))
    labels = np.arange(n_points) % n_classes
    rng.shuffle(labels)
    scales = np.full(dim, noise_scale)
    scales[:informative] = 1.0
    X = centers[labels] + rng.standard_normal((n_points, dim)) * scales
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    X = X @ (q * np.sign(np.diag(r)))
    return Dataset(X, labels)


def load_csv(path: str, header: bool = False) -> Dataset:
    """Read a dataset whose rows end in an integer label."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if header:
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    try:
        arr = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from exc
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise ValueError(f"{path}: need at least one feature column and a label column")
    return Dataset(arr[:, :-1], arr[:, -1])


def split(data: Dataset, test_fraction: float = 0.3, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """Random train/test split."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    idx = rng_for(seed).permutation(len(data))
    n_test = int(round(test_fraction * len(data)))
    te, tr = idx[:n_test], idx[n_test:]
    return (
        Dataset(data.points[tr], data.labels[tr]),
        Dataset(data.points[te], data.labels[te]),
    )


def pca_reduce(data: Dataset, dims: int) -> Dataset:
    """Center the points and keep their top ``dims`` principal coordinates."""
    if dims <= 0:
        raise ValueError("dims must be positive")
    if dims > data.n:
        raise ValueError(f"dims must not exceed the dimension {data.n}")
    Xc = data.points - data.points.mean(axis=0)
    _, _, Vt = np.linalg.svd(Xc, full_matrices=False)
    return Dataset(Xc @ Vt[:dims].T, data.labels)


@dataclass(frozen=True)
class MetricModel:
    """Dense PSD metric ``S`` or its reflector-factored projection."""

    kind: str
    dense: Optional[np.ndarray] = None
    factored: Optional[FactoredSymmetric] = None
    projection_error: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind == "dense":
            if self.dense is None:
                raise ValueError("dense model needs a matrix")
            S = np.asarray(self.dense, dtype=np.float64)
            if S.ndim != 2 or S.shape[0] != S.shape[1]:
                raise ValueError("metric must be square")
            S = 0.5 * (S + S.T)
            if np.linalg.eigvalsh(S)[0] < PSD_FLOOR * max(1.0, np.abs(S).max()):
                raise ValueError("metric must be positive semidefinite")
            object.__setattr__(self, "dense", S)
        elif self.kind == "factored":
            if self.factored is None:
                raise ValueError("factored model needs a FactoredSymmetric")
            if np.any(self.factored.spectrum < 0):
                raise ValueError("factored spectrum must be nonnegative")
        else:
            raise ValueError(f"unknown model kind {self.kind!r}")

    @classmethod
    def identity(cls, n: int) -> "MetricModel":
        return cls("dense", dense=np.eye(n))

    @property
    def n(self) -> int:
        return self.dense.shape[0] if self.kind == "dense" else self.factored.n

    def matrix(self) -> np.ndarray:
        return self.dense if self.kind == "dense" else to_dense(self.factored)

    def transform(self, X: np.ndarray, counter: Optional[FlopCounter] = None) -> np.ndarray:
        """Map rows ``x`` to ``L x`` with ``L^T L`` equal to the metric.

        Dense: ``L = sqrt(Lambda) V^T`` from ``S = V Lambda V^T``, costing
        ``2n^2`` flops per point. Factored: ``L = sqrt(s) Ubar^T``, costing
        ``4nh + n`` flops per point.
        """
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        m = X.shape[0]
        if self.kind == "dense":
            w, V = np.linalg.eigh(self.dense)
            L = np.sqrt(np.clip(w, 0.0, None))[:, None] * V.T
            if counter is not None:
                counter.add(2 * self.n * self.n * m)
            return X @ L.T
        Y = apply_transpose(self.factored.basis, X.T, counter)
        Y *= np.sqrt(self.factored.spectrum)[:, None]
        if counter is not None:
            counter.add(self.n * m)
        return Y.T

    def distance(self, x: np.ndarray, y: np.ndarray) -> float:
        d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
        return float(d @ self.matrix() @ d)


def target_neighbors(data: Dataset, k: int = 3) -> np.ndarray:
    """Indices of the ``k`` nearest same-class points (Euclidean) of each point.

    Classes with fewer than ``k + 1`` members use all other members; missing
    slots are ``-1``.
    """
    N = len(data)
    out = np.full((N, k), -1, dtype=np.int64)
    for c in np.unique(data.labels):
        idx = np.flatnonzero(data.labels == c)
        if idx.size < 2:
            continue
        kk = min(k, idx.size - 1)
        tree = cKDTree(data.points[idx])
        _, nb = tree.query(data.points[idx], k=kk + 1)
        nb = np.atleast_2d(nb)
        out[idx, :kk] = idx[nb[:, 1:]]
    return out


def _pairwise_sq(Y: np.ndarray) -> np.ndarray:
    g = np.sum(Y * Y, axis=1)
    D = g[:, None] + g[None, :] - 2.0 * (Y @ Y.T)
    return np.maximum(D, 0.0)


def _dense_transform(S: np.ndarray, X: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(S)
    return X @ (V * np.sqrt(np.clip(w, 0.0, None)))


def _loss_and_weights(
    S: np.ndarray, data: Dataset, targets: np.ndarray, margin: float, mu: float, want_weights: bool
):
    X, y = data.points, data.labels
    N = X.shape[0]
    D = _pairwise_sq(_dense_transform(S, X))
    valid = targets >= 0
    rows = np.repeat(np.arange(N), targets.shape[1]).reshape(targets.shape)
    ti, tj = rows[valid], targets[valid]
    d_t = D[ti, tj]
    diff = y[ti][:, None] != y[None, :]
    hinge = margin + d_t[:, None] - D[ti]
    active = (hinge > 0) & diff
    npairs = max(ti.size, 1)
    loss = (d_t.sum() + mu * np.sum(hinge[active])) / npairs
    if not want_weights:
        return loss, None
    W = np.zeros((N, N))
    counts = active.sum(axis=1)
    np.add.at(W, (ti, tj), (1.0 + mu * counts) / npairs)
    tri, l_idx = np.nonzero(active)
    np.add.at(W, (ti[tri], l_idx), -mu / npairs)
    return loss, W


def lmnn_loss(
    S: np.ndarray, data: Dataset, targets: np.ndarray, margin: float = 1.0, mu: float = 0.5
) -> float:
    return float(_loss_and_weights(S, data, targets, margin, mu, False)[0])


def lmnn_gradient(
    S: np.ndarray, data: Dataset, targets: np.ndarray, margin: float = 1.0, mu: float = 0.5
) -> np.ndarray:
    """Gradient in ``S`` of :func:`lmnn_loss` (a subgradient at hinge kinks).

    Every term is ``w_pq (x_p - x_q)(x_p - x_q)^T``; summed, this is
    ``X^T (Diag(W 1 + W^T 1) - W - W^T) X``.
    """
    _, W = _loss_and_weights(S, data, targets, margin, mu, True)
    Wsym = W + W.T
    lap = np.diag(Wsym.sum(axis=1)) - Wsym
    X = data.points
    G = X.T @ lap @ X
    return 0.5 * (G + G.T)


def _psd_project(S: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    out = (V * np.clip(w, 0.0, None)) @ V.T
    return 0.5 * (out + out.T)


def lmnn_step(
    model: MetricModel,
    data: Dataset,
    step_size: float,
    margin: float = 1.0,
    mu: float = 0.5,
    targets: Optional[np.ndarray] = None,
    max_halvings: int = 20,
) -> MetricModel:
    """One projected gradient step with backtracking.

    The step is halved until the loss does not increase, at most
    ``max_halvings`` times; if no step helps, the model is returned
    unchanged.
    """
    if model.kind != "dense":
        raise ValueError("lmnn_step needs a dense model")
    if targets is None:
        targets = target_neighbors(data)
    S = model.dense
    loss0 = lmnn_loss(S, data, targets, margin, mu)
    if loss0 == 0.0:
        # the loss is nonnegative, so this is already a minimizer
        return model
    G = lmnn_gradient(S, data, targets, margin, mu)
    if not np.any(G):
        return model
    eta = step_size
    for _ in range(max_halvings + 1):
        S_new = _psd_project(S - eta * G)
        if lmnn_loss(S_new, data, targets, margin, mu) <= loss0:
            return MetricModel("dense", dense=S_new)
        eta *= 0.5
    return model


def project_metric(
    model: MetricModel, h: int, cfg: Optional[SHFConfig] = None
) -> MetricModel:
    """Project a dense metric onto ``h`` reflectors with spectrum refitting.

    Negative spectrum entries are clamped to zero so the result stays PSD.
    The default configuration starts from the partial eigendecomposition,
    which makes the result at least as accurate as that baseline.
    """
    if model.kind != "dense":
        raise ValueError("project_metric needs a dense model")
    if cfg is None:
        cfg = SHFConfig(h=h, spectrum_update=True, init_mode="baseline")
    elif cfg.h != h:
        cfg = replace(cfg, h=h)
    S = model.dense
    f, _ = shf(S, cfg)
    clamped = FactoredSymmetric(f.basis, np.clip(f.spectrum, 0.0, None))
    err = relative_error(S, to_dense(clamped))
    return MetricModel("factored", factored=clamped, projection_error=err)


def train_dense(
    data: Dataset,
    total_iters: int,
    step_size: float = 0.1,
    margin: float = 1.0,
    mu: float = 0.5,
    k_target: int = 3,
    loss_trace: Optional[list] = None,
) -> MetricModel:
    """``total_iters`` unconstrained steps from the identity metric."""
    targets = target_neighbors(data, k_target)
    model = MetricModel.identity(data.n)
    for _ in range(total_iters):
        model = lmnn_step(model, data, step_size, margin, mu, targets)
        if loss_trace is not None:
            loss_trace.append(lmnn_loss(model.dense, data, targets, margin, mu))
    return model


def train_projected(
    data: Dataset,
    h: int,
    total_iters: int,
    cfg: Optional[SHFConfig] = None,
    step_size: float = 0.1,
    margin: float = 1.0,
    mu: float = 0.5,
    k_target: int = 3,
    from_projected: bool = True,
) -> MetricModel:
    """Unconstrained steps for the first half, then step-and-project.

    In the second half each step starts from the last projected metric when
    ``from_projected`` is set, otherwise from the last unprojected one.
    The returned model is factored.
    """
    if total_iters < 2:
        raise ValueError("total_iters must be at least 2")
    targets = target_neighbors(data, k_target)
    model = MetricModel.identity(data.n)
    first = total_iters // 2
    for _ in range(first):
        model = lmnn_step(model, data, step_size, margin, mu, targets)
    projected = None
    for _ in range(total_iters - first):
        model = lmnn_step(model, data, step_size, margin, mu, targets)
        projected = project_metric(model, h, cfg)
        if from_projected:
            model = MetricModel("dense", dense=projected.matrix())
    return projected


def knn_classify(
    model: MetricModel, train: Dataset, test: Dataset, k: int = 3
) -> Tuple[np.ndarray, float]:
    """k-nearest-neighbor prediction under the model's metric.

    Votes are unweighted; ties go to the smallest label.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > len(train):
        raise ValueError(f"k={k} exceeds the training set size {len(train)}")
    Ytr = model.transform(train.points)
    Yte = model.transform(test.points)
    _, nb = cKDTree(Ytr).query(Yte, k=k)
    nb = nb.reshape(len(test), k)
    votes = train.labels[nb]
    classes = np.unique(train.labels)
    counts = (votes[:, :, None] == classes[None, None, :]).sum(axis=1)
    pred = classes[np.argmax(counts, axis=1)]
    return pred, float(np.mean(pred == test.labels))
