import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adscreen.model import (
    ForestConfig, ForestModel, Tree, ablation_sweep, anova_f, evaluate, grid_search,
    metrics_from_predictions, predict, rank_by_f, stratified_folds, train_forest,
)
from oracles import pooled_t


def noisy_data(n=80, p=5, seed=0):
    rng = np.random.default_rng(seed)
    y = np.array(["HC", "AD"] * (n // 2))
    X = rng.normal(size=(n, p))
    X[:, 0] += 2.5 * (y == "AD")
    return X, y


def stub_forest(votes):
    trees = [Tree(feature=[-1], threshold=[0.0], left=[-1], right=[-1], counts=[[1 - v, v]]) for v in votes]
    return ForestModel(trees, ForestConfig(n_trees=len(votes)), 1, ["f0"], np.zeros(1))


def test_separable_single_tree():
    X = np.array([[-3.0], [-2.0], [-1.0], [1.0], [2.0], [3.0]])
    y = ["HC"] * 3 + ["AD"] * 3
    m = train_forest(X, y, ForestConfig(n_trees=1, bootstrap=False))
    assert evaluate(m, X, y).accuracy == 1.0
    assert m.trees[0].threshold[0] == 0.0


def test_constant_feature_zero_importance():
    X, y = noisy_data()
    X[:, 3] = 7.0
    m = train_forest(X, y, ForestConfig(n_trees=30, seed=1))
    assert m.importance[3] == 0.0
    assert m.importance.sum() == pytest.approx(1.0, abs=1e-9)


def test_determinism_and_threads():
    X, y = noisy_data()
    cfg = ForestConfig(n_trees=25, seed=3)
    a = train_forest(X, y, cfg).dumps()
    assert a == train_forest(X, y, cfg).dumps()
    assert a == train_forest(X, y, ForestConfig(n_trees=25, seed=3, n_jobs=4)).dumps()
    assert a != train_forest(X, y, ForestConfig(n_trees=25, seed=4)).dumps()


def test_json_roundtrip():
    X, y = noisy_data()
    m = train_forest(X, y, ForestConfig(n_trees=5))
    m2 = ForestModel.loads(m.dumps())
    assert m2.dumps() == m.dumps()
    assert np.array_equal(m2.predict_proba(X), m.predict_proba(X))


def test_train_errors():
    X, y = noisy_data()
    with pytest.raises(ValueError):
        train_forest(X, ["HC"] * len(y))
    X[0, 0] = math.nan
    with pytest.raises(ValueError, match="NaN"):
        train_forest(X, y)


@pytest.mark.parametrize("votes,label,prob", [
    ([0, 0, 0, 0], "HC", 0.0),
    ([1, 1, 1, 0], "AD", 0.75),
    ([1, 0, 1, 0], "AD", 0.5),
])
def test_predict_tie_rule(votes, label, prob):
    assert predict(stub_forest(votes), [0.0]) == (label, prob)


def test_metrics_examples():
    r = metrics_from_predictions(["AD", "HC", "AD"], ["AD", "HC", "AD"])
    assert (r.accuracy, r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0, 1.0)
    r = metrics_from_predictions(["AD", "HC", "AD"], ["HC"] * 3)
    assert (r.precision, r.recall, r.f1) == (0.0, 0.0, 0.0)
    p, rec = 0.870, 0.833
    assert 2 * p * rec / (p + rec) == pytest.approx(0.851, abs=5e-4)


def test_metrics_published_row_is_consistent():
    # 24 AD / 24 HC test subjects; 20 TP, 3 FP, 4 FN, 21 TN
    y_true = ["AD"] * 24 + ["HC"] * 24
    y_pred = ["AD"] * 20 + ["HC"] * 4 + ["AD"] * 3 + ["HC"] * 21
    r = metrics_from_predictions(y_true, y_pred)
    assert [round(100 * v, 1) for v in (r.accuracy, r.precision, r.recall, r.f1)] == [85.4, 87.0, 83.3, 85.1]


@given(st.lists(st.tuples(st.sampled_from(["HC", "AD"]), st.sampled_from(["HC", "AD"])), min_size=1, max_size=40))
def test_metrics_from_counts(pairs):
    r = metrics_from_predictions([a for a, _ in pairs], [b for _, b in pairs])
    n = r.tp + r.fp + r.fn + r.tn
    assert n == len(pairs)
    assert r.accuracy == pytest.approx((r.tp + r.tn) / n, abs=1e-12)
    if r.tp:
        assert r.precision == pytest.approx(r.tp / (r.tp + r.fp), abs=1e-12)
        assert r.recall == pytest.approx(r.tp / (r.tp + r.fn), abs=1e-12)
        assert r.f1 == pytest.approx(2 * r.tp / (2 * r.tp + r.fp + r.fn), abs=1e-12)


def test_anova_examples():
    y = ["HC", "HC", "AD", "AD"]
    assert anova_f([[1], [2], [3], [4]], y)[0] == pytest.approx(8.0, abs=1e-9)
    assert anova_f([[1], [2], [1], [2]], y)[0] == 0.0
    assert anova_f([[1], [1], [2], [2]], y)[0] == math.inf
    assert anova_f([[5], [5], [5], [5]], y)[0] == 0.0
    with pytest.raises(ValueError):
        anova_f([[1], [2], [3]], ["HC", "AD", "AD"])


def test_anova_against_scipy():
    scipy_stats = pytest.importorskip("scipy.stats")
    X, y = noisy_data(seed=5)
    ours = anova_f(X, y)
    ref = scipy_stats.f_oneway(X[y == "HC"], X[y == "AD"]).statistic
    np.testing.assert_allclose(ours, ref, rtol=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=12),
       st.lists(st.floats(-100, 100), min_size=2, max_size=12))
def test_anova_equals_t_squared(a, b):
    X = np.array(a + b)[:, None]
    y = ["HC"] * len(a) + ["AD"] * len(b)
    f = anova_f(X, y)[0]
    ss = np.var(a) * len(a) + np.var(b) * len(b)
    if ss < 1e-9 or abs(np.mean(a) - np.mean(b)) < 1e-6:
        return
    t = pooled_t(a, b)
    assert f == pytest.approx(t * t, rel=1e-9, abs=1e-9)


def test_rank_by_f():
    assert rank_by_f([1.0, math.inf, 3.0, 1.0]) == [1, 2, 0, 3]


@pytest.mark.parametrize("transform", [np.exp, lambda v: v ** 3, lambda v: 2 * v + 10, np.arctan])
def test_importance_monotone_invariance(transform):
    X, y = noisy_data(seed=2)
    cfg = ForestConfig(n_trees=20, seed=9)
    base = train_forest(X, y, cfg)
    X2 = X.copy()
    X2[:, 0] = transform(X2[:, 0])
    moved = train_forest(X2, y, cfg)
    np.testing.assert_allclose(moved.importance, base.importance, rtol=0, atol=1e-12)
    assert np.array_equal(moved.predict(X2), base.predict(X))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(4, 30), st.integers(1, 4))
def test_plain_cart_fits_consistent_data(seed, n, p):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, size=(n, p)).astype(float)
    # labels as a function of x keep the data consistent
    y = np.where((X.sum(axis=1) + X[:, 0] * 7) % 3 == 0, "AD", "HC")
    if len(set(y)) < 2:
        return
    m = train_forest(X, y, ForestConfig(n_trees=1, bootstrap=False, max_features=p, seed=seed))
    assert evaluate(m, X, y).accuracy == 1.0


def test_ablation_sweep():
    X, y = noisy_data(n=100, p=6, seed=4)
    Xtr, ytr, Xte, yte = X[:70], y[:70], X[70:], y[70:]
    cfg = ForestConfig(n_trees=20, seed=2)
    curve = ablation_sweep(Xtr, ytr, Xte, yte, cfg)
    assert [n for n, _, _ in curve] == list(range(1, 7))
    assert sorted(c for _, _, c in curve) == list(range(6))
    assert curve[0][2] == 0
    full = evaluate(train_forest(Xtr, ytr, cfg), Xte, yte).accuracy
    assert curve[-1][1] == full
    # the single informative feature alone beats chance comfortably
    assert curve[0][1] >= 0.7


def test_stratified_folds():
    y = ["HC"] * 10 + ["AD"] * 6
    folds = stratified_folds(y, 3, seed=1)
    assert sorted(np.concatenate(folds).tolist()) == list(range(16))
    for f in folds:
        assert 2 <= sum(1 for i in f if y[i] == "AD") <= 2
    with pytest.raises(ValueError):
        stratified_folds(y, 7)


def test_grid_search():
    X, y = noisy_data(n=40, p=3, seed=6)
    base = ForestConfig(n_trees=10, seed=1)
    best, results = grid_search(X, y, [{"n_trees": 5}], folds=3, base=base)
    assert best.n_trees == 5 and len(results) == 1
    grid = [{"n_trees": 5, "max_depth": 2}, {"n_trees": 8}]
    b1, r1 = grid_search(X, y, grid, folds=3, base=base)
    b2, r2 = grid_search(X, y, grid + [{"max_depth": 2, "n_trees": 5}], folds=3, base=base)
    assert b1 == b2 and r1 == r2
    with pytest.raises(ValueError):
        grid_search(X, y, [], base=base)
    with pytest.raises(ValueError):
        grid_search(X, y, [{"n_trees": 5}], folds=50, base=base)
