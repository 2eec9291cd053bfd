import numpy as np
import pytest

from hhfactor.ensembles import random_wishart
from hhfactor.metric import (
    Dataset,
    MetricModel,
    knn_classify,
    lmnn_gradient,
    lmnn_loss,
    lmnn_step,
    load_csv,
    make_blobs,
    pca_reduce,
    project_metric,
    split,
    target_neighbors,
    train_dense,
    train_projected,
)
from hhfactor.reflectors import FactoredSymmetric, FlopCounter, ReflectorProduct, to_dense
from hhfactor.symmetric import SHFConfig, partial_eig_baseline


def _min_eig(model):
    return np.linalg.eigvalsh(model.matrix())[0]


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros(3, dtype=int))
    with pytest.raises(ValueError):
        Dataset(np.array([[np.inf, 0.0], [1.0, 1.0]]), np.array([0, 1]))
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), np.array([0, 1, 1]))
    d = Dataset(np.zeros((2, 2)), np.array([0.0, 1.0]))
    assert d.labels.dtype.kind == "i"


def test_pca_full_dimension_preserves_distances(rng):
    X = rng.standard_normal((30, 5))
    d = pca_reduce(Dataset(X, np.arange(30) % 2), 5)
    D0 = np.linalg.norm(X[:, None] - X[None], axis=2)
    D1 = np.linalg.norm(d.points[:, None] - d.points[None], axis=2)
    np.testing.assert_allclose(D1, D0, atol=1e-9)


def test_pca_rank_one(rng):
    t = rng.standard_normal(40)
    direction = np.array([1.0, 2.0, -2.0]) / 3.0
    X = np.outer(t, direction) + 5.0
    d = pca_reduce(Dataset(X, np.arange(40) % 2), 1)
    recon = np.outer(d.points[:, 0], direction) * np.sign(d.points[0, 0] * t[0] + 1e-300)
    Xc = X - X.mean(axis=0)
    assert min(np.abs(recon - Xc).max(), np.abs(recon + Xc).max()) <= 1e-9


def test_pca_captured_variance(rng):
    X = rng.standard_normal((200, 10)) @ rng.standard_normal((10, 10))
    d = pca_reduce(Dataset(X, np.arange(200) % 3), 3)
    cov = np.cov(X.T)
    top = np.sort(np.linalg.eigvalsh(cov))[::-1][:3].sum()
    assert np.var(d.points, axis=0, ddof=1).sum() == pytest.approx(top, abs=1e-8)
    with pytest.raises(ValueError):
        pca_reduce(d, 0)
    with pytest.raises(ValueError):
        pca_reduce(d, 4)


def test_zero_loss_configuration_leaves_metric_unchanged():
    X = np.array([[0.0, 0.0]] * 4 + [[50.0, 50.0]] * 4)
    data = Dataset(X, np.array([0] * 4 + [1] * 4))
    model = MetricModel.identity(2)
    targets = target_neighbors(data)
    assert lmnn_loss(model.dense, data, targets) == 0.0
    out = lmnn_step(model, data, 0.5, targets=targets)
    np.testing.assert_array_equal(out.dense, np.eye(2))


def test_single_pull_pair_gradient_and_decrease():
    X = np.array([[0.0, 0.0], [1.0, 2.0], [100.0, 100.0], [101.0, 100.0]])
    data = Dataset(X, np.array([0, 0, 1, 1]))
    targets = target_neighbors(data, k=1)
    S = np.eye(2)
    G = lmnn_gradient(S, data, targets)
    eps = 1e-6
    fd = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            E = np.zeros((2, 2))
            E[i, j] = E[j, i] = eps if i != j else eps
            step = (lmnn_loss(S + E, data, targets) - lmnn_loss(S - E, data, targets)) / (2 * eps)
            fd[i, j] = step if i == j else step / 2
    assert np.linalg.norm(fd - G) <= 1e-5 * np.linalg.norm(G)
    out = lmnn_step(MetricModel.identity(2), data, 0.05, targets=targets)
    assert lmnn_loss(out.dense, data, targets) < lmnn_loss(S, data, targets)


def test_loss_trace_non_increasing_and_psd():
    data = make_blobs(n_points=150, dim=6, seed=1)
    trace = []
    targets = target_neighbors(data)
    model = MetricModel.identity(6)
    prev = lmnn_loss(model.dense, data, targets)
    for _ in range(50):
        model = lmnn_step(model, data, 0.1, targets=targets)
        cur = lmnn_loss(model.dense, data, targets)
        trace.append(cur)
        assert cur <= prev + 1e-12
        assert _min_eig(model) >= -1e-9
        prev = cur
    assert trace[-1] < trace[0]


def test_project_identity_is_exact():
    m = project_metric(MetricModel.identity(5), 2)
    assert m.factored.h == 0 and m.projection_error == 0.0


def test_project_exact_reflector_form():
    rng = np.random.default_rng(3)
    p = ReflectorProduct.from_vectors(rng.standard_normal((2, 8)), n=8)
    S = to_dense(FactoredSymmetric(p, np.abs(rng.standard_normal(8)) + 0.1))
    S = 0.5 * (S + S.T)
    _, rb = partial_eig_baseline(S, 2)
    m = project_metric(MetricModel("dense", dense=S), 2)
    assert m.projection_error <= rb.normalized_error + 1e-12
    assert _min_eig(m) >= -1e-9


def test_project_wishart_dominates_baseline():
    S = random_wishart(20, 0)
    _, rb = partial_eig_baseline(S, 5)
    m = project_metric(MetricModel("dense", dense=S), 5)
    assert m.projection_error <= rb.normalized_error + 1e-12
    assert np.all(m.factored.spectrum >= 0)


def test_project_with_custom_config():
    S = random_wishart(8, 1)
    m = project_metric(MetricModel("dense", dense=S), 3, SHFConfig(h=1, max_outer=5, spectrum_update=True))
    assert m.factored.basis.requested_h == 3


def test_transform_consistency_exact_factorization():
    S = random_wishart(12, 4)
    dense = MetricModel("dense", dense=S)
    fact = project_metric(dense, 11)
    rng = np.random.default_rng(0)
    X = rng.standard_normal((20, 12))
    nd = np.linalg.norm(dense.transform(X), axis=1)
    nf = np.linalg.norm(fact.transform(X), axis=1)
    assert np.all(np.abs(nd - nf) <= 1e-6 * np.linalg.norm(X, axis=1))
    x, y = X[0], X[1]
    assert fact.distance(x, x) == pytest.approx(0.0, abs=1e-12)
    assert fact.distance(x, y) == pytest.approx(fact.distance(y, x))
    assert dense.distance(x, y) == pytest.approx(fact.distance(x, y), rel=1e-8)


def test_factored_transform_flops():
    n, h = 256, 8
    rng = np.random.default_rng(1)
    p = ReflectorProduct.from_vectors(rng.standard_normal((h, n)), n=n)
    fact = MetricModel("factored", factored=FactoredSymmetric(p, np.ones(n)))
    dense = MetricModel("dense", dense=np.eye(n))
    X = rng.standard_normal((10, n))
    cf, cd = FlopCounter(), FlopCounter()
    fact.transform(X, cf)
    dense.transform(X, cd)
    assert cf.flops == (4 * n * h + n) * 10
    assert cd.flops >= 5 * cf.flops


def test_model_validation():
    with pytest.raises(ValueError):
        MetricModel("dense", dense=-np.eye(2))
    with pytest.raises(ValueError):
        MetricModel("sparse")
    p = ReflectorProduct(np.zeros((0, 2)), np.ones(2))
    with pytest.raises(ValueError):
        MetricModel("factored", factored=FactoredSymmetric(p, np.array([1.0, -1.0])))
    with pytest.raises(ValueError):
        lmnn_step(MetricModel("factored", factored=FactoredSymmetric(p, np.ones(2))), make_blobs(30, 2, seed=0), 0.1)


def test_knn_examples():
    data = make_blobs(n_points=60, dim=4, seed=2)
    _, acc = knn_classify(MetricModel.identity(4), data, data, k=1)
    assert acc == 1.0
    X = np.vstack([np.zeros((10, 2)), np.full((10, 2), 10.0)]) + np.random.default_rng(0).standard_normal((20, 2)) * 0.1
    two = Dataset(X, np.array([0] * 10 + [1] * 10))
    tr, te = split(two, 0.5, seed=1)
    assert knn_classify(MetricModel.identity(2), tr, te, k=3)[1] == 1.0
    with pytest.raises(ValueError):
        knn_classify(MetricModel.identity(2), tr, te, k=len(tr) + 1)
    with pytest.raises(ValueError):
        knn_classify(MetricModel.identity(2), tr, te, k=0)


def test_training_pipeline_minimal_and_exact():
    data = make_blobs(n_points=120, dim=5, seed=3)
    tr, te = split(data, 0.3, seed=3)
    m = train_projected(tr, 2, 2)
    assert m.kind == "factored"
    with pytest.raises(ValueError):
        train_projected(tr, 2, 1)
    dense = train_dense(tr, 6)
    exact = train_projected(tr, 4, 6)
    pd_, ad = knn_classify(dense, tr, te)
    pe, ae = knn_classify(exact, tr, te)
    assert abs(ad - ae) <= 0.01
    exact_proj = project_metric(dense, 4)
    px, _ = knn_classify(exact_proj, tr, te)
    np.testing.assert_array_equal(px, pd_)


def test_load_csv(tmp_path):
    f = tmp_path / "d.csv"
    f.write_text("a,b,label\n0.5,1.0,0\n2.0,3.0,1\n")
    d = load_csv(str(f), header=True)
    np.testing.assert_allclose(d.points, [[0.5, 1.0], [2.0, 3.0]])
    np.testing.assert_array_equal(d.labels, [0, 1])
    g = tmp_path / "e.csv"
    g.write_text("0.5,1.0,0\n2.0,3.0,1\n")
    assert len(load_csv(str(g))) == 2
    with pytest.raises(ValueError):
        load_csv(str(f))
