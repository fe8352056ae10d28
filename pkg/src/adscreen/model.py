"""Random forest (CART, Gini), evaluation metrics, ANOVA F-values and the ablation sweep.

Labels are encoded with AD = 1 (positive class) and HC = 0.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

LABELS = ("HC", "AD")


def encode_labels(y) -> np.ndarray:
    out = []
    for v in y:
        if v in ("AD", 1, True):
            out.append(1)
        elif v in ("HC", 0, False):
            out.append(0)
        else:
            raise ValueError(f"label must be HC or AD, got {v!r}")
    return np.asarray(out, dtype=np.int64)


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 300
    max_features: Optional[int] = None  # None -> ceil(sqrt(n_features)), 4 for 15 features
    min_samples_leaf: int = 1
    max_depth: Optional[int] = None
    bootstrap: bool = True
    seed: int = 0
    n_jobs: int = 1

    def resolved_max_features(self, n_features: int) -> int:
        mf = self.max_features or math.ceil(math.sqrt(n_features))
        return max(1, min(mf, n_features))


# ---------------------------------------------------------------------------
# single tree

@dataclass
class Tree:
    feature: list[int] = field(default_factory=list)      # -1 at leaves
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    counts: list[list[int]] = field(default_factory=list)  # [n_HC, n_AD]

    def _add(self, counts) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append([int(counts[0]), int(counts[1])])
        return len(self.feature) - 1

    def leaf_vote(self, x) -> int:
        node = 0
        while self.feature[node] >= 0:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
        n_hc, n_ad = self.counts[node]
        # ties go to AD, matching the forest-level rule
        return 1 if n_ad >= n_hc else 0

    def to_dict(self) -> dict:
        return asdict(self)


def gini(counts) -> float:
    n = counts[0] + counts[1]
    if n == 0:
        return 0.0
    p = counts[1] / n
    return 2.0 * p * (1.0 - p)


def _best_split(xs: np.ndarray, ys: np.ndarray, min_leaf: int):
    """Best threshold on one feature column: (decrease_in_weighted_gini, threshold) or None.

    The decrease is ``n_node * gini(node) - n_left * gini(left) - n_right * gini(right)``.
    """
    order = np.argsort(xs, kind="stable")
    xs = xs[order]
    ys = ys[order]
    n = len(xs)
    distinct = np.nonzero(xs[1:] > xs[:-1])[0]  # split after position i
    if len(distinct) == 0:
        return None
    ad_left = np.cumsum(ys)[distinct]
    n_left = distinct + 1
    valid = (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not valid.any():
        return None
    total_ad = int(ys.sum())
    n_right = n - n_left
    ad_right = total_ad - ad_left
    # n * gini = 2 * n_ad * n_hc / n
    w_left = 2.0 * ad_left * (n_left - ad_left) / n_left
    w_right = 2.0 * ad_right * (n_right - ad_right) / n_right
    parent = 2.0 * total_ad * (n - total_ad) / n
    decrease = parent - w_left - w_right
    decrease = np.where(valid, decrease, -np.inf)
    k = int(np.argmax(decrease))  # first maximum -> lowest threshold
    i = distinct[k]
    lo, hi = float(xs[i]), float(xs[i + 1])
    thr = lo + (hi - lo) / 2.0
    if thr >= hi or thr < lo:
        thr = lo
    return float(decrease[k]), thr


def build_tree(X: np.ndarray, y: np.ndarray, max_features: int, min_samples_leaf: int,
               max_depth: Optional[int], rng: np.random.Generator):
    """Grow one CART tree. Returns (tree, per-feature weighted impurity decrease)."""
    n_samples, n_features = X.shape
    tree = Tree()
    importance = np.zeros(n_features)
    stack = [(np.arange(n_samples), tree._add(np.bincount(y, minlength=2)), 0)]
    while stack:
        idx, node, depth = stack.pop()
        counts = tree.counts[node]
        if counts[0] == 0 or counts[1] == 0:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        if len(idx) < 2 * min_samples_leaf:
            continue
        Xn, yn = X[idx], y[idx]
        perm = rng.permutation(n_features)
        best = None  # (decrease, feature, threshold)
        # searched features first; if none of them can split, keep drawing
        for pos, f in enumerate(perm):
            if pos >= max_features and best is not None:
                break
            found = _best_split(Xn[:, f], yn, min_samples_leaf)
            if found is None:
                continue
            dec, thr = found
            key = (dec, -f, -thr)
            if best is None or key > (best[0], -best[1], -best[2]):
                best = (dec, int(f), thr)
        if best is None:
            continue
        dec, f, thr = best
        importance[f] += dec
        go_left = Xn[:, f] <= thr
        left_idx, right_idx = idx[go_left], idx[~go_left]
        tree.feature[node] = f
        tree.threshold[node] = thr
        left = tree._add(np.bincount(y[left_idx], minlength=2))
        right = tree._add(np.bincount(y[right_idx], minlength=2))
        tree.left[node] = left
        tree.right[node] = right
        stack.append((right_idx, right, depth + 1))
        stack.append((left_idx, left, depth + 1))
    return tree, importance / n_samples


# ---------------------------------------------------------------------------
# forest

@dataclass
class ForestModel:
    trees: list[Tree]
    config: ForestConfig
    max_features: int
    feature_names: list[str]
    importance: np.ndarray

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def rng_seed(self) -> int:
        return self.config.seed

    @property
    def min_samples_leaf(self) -> int:
        return self.config.min_samples_leaf

    def votes(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([[t.leaf_vote(row) for t in self.trees] for row in X])

    def predict_proba(self, X) -> np.ndarray:
        """Fraction of trees voting AD."""
        return self.votes(X).mean(axis=1)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg.pop("n_jobs")
        return {
            "config": cfg,
            "max_features": self.max_features,
            "feature_names": list(self.feature_names),
            "importance": [float(v) for v in self.importance],
            "trees": [t.to_dict() for t in self.trees],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":")) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        return cls(
            trees=[Tree(**t) for t in d["trees"]],
            config=ForestConfig(**d["config"]),
            max_features=int(d["max_features"]),
            feature_names=list(d["feature_names"]),
            importance=np.asarray(d["importance"], dtype=float),
        )

    @classmethod
    def loads(cls, text: str) -> "ForestModel":
        return cls.from_dict(json.loads(text))


def predict(model: ForestModel, x) -> tuple[str, float]:
    """Label and AD probability for one feature row (AD on a 50/50 vote)."""
    values = x.values() if hasattr(x, "values") and callable(x.values) else x
    p = float(model.predict_proba([values])[0])
    return ("AD" if p >= 0.5 else "HC"), p


def train_forest(X, y, config: ForestConfig = ForestConfig(), feature_names: Optional[Sequence[str]] = None) -> ForestModel:
    """Bootstrap-aggregated CART trees with per-split feature subsampling.

    Tree ``i`` draws from its own generator seeded by ``(seed, i)``, so the
    result does not depend on ``n_jobs``.
    """
    X = np.asarray(X, dtype=float)
    y = encode_labels(y)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one row per label")
    if len(y) < 2:
        raise ValueError("need at least two training samples")
    if len(np.unique(y)) < 2:
        raise ValueError("training labels contain a single class")
    if np.isnan(X).any():
        raise ValueError("feature matrix contains NaN; impute before training")
    if config.n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    n, p = X.shape
    mf = config.resolved_max_features(p)

    def grow(i: int):
        rng = np.random.default_rng([config.seed, i])
        if config.bootstrap:
            sample = rng.integers(0, n, size=n)
            Xs, ys = X[sample], y[sample]
        else:
            Xs, ys = X, y
        return build_tree(Xs, ys, mf, config.min_samples_leaf, config.max_depth, rng)

    if config.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=config.n_jobs) as pool:
            grown = list(pool.map(grow, range(config.n_trees)))
    else:
        grown = [grow(i) for i in range(config.n_trees)]

    importance = np.mean([imp for _, imp in grown], axis=0)
    total = importance.sum()
    if total > 0:
        importance = importance / total
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(p)]
    return ForestModel([t for t, _ in grown], config, mf, names, importance)


# ---------------------------------------------------------------------------
# evaluation

@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int


def metrics_from_predictions(y_true, y_pred) -> EvalReport:
    t = encode_labels(y_true)
    p = encode_labels(y_pred)
    if len(t) == 0:
        raise ValueError("no samples to evaluate")
    if len(t) != len(p):
        raise ValueError("y_true and y_pred differ in length")
    tp = int(((t == 1) & (p == 1)).sum())
    fp = int(((t == 0) & (p == 1)).sum())
    fn = int(((t == 1) & (p == 0)).sum())
    tn = int(((t == 0) & (p == 0)).sum())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport((tp + tn) / len(t), precision, recall, f1, tp, fp, fn, tn)


def evaluate(model: ForestModel, X_test, y_test) -> EvalReport:
    return metrics_from_predictions(y_test, model.predict(X_test))


# ---------------------------------------------------------------------------
# ANOVA

def anova_f(X, y) -> np.ndarray:
    """One-way ANOVA F per column for the HC/AD grouping.

    Zero within-group variance with separated means gives ``inf``; a column
    with no between-group variance gives 0.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = encode_labels(y)
    groups = [X[y == g] for g in (0, 1)]
    for g, rows in zip(LABELS, groups):
        if len(rows) < 2:
            raise ValueError(f"class {g} has fewer than 2 samples")
    n, k = len(X), 2
    grand = X.mean(axis=0)
    between = sum(len(rows) * (rows.mean(axis=0) - grand) ** 2 for rows in groups)
    within = sum(((rows - rows.mean(axis=0)) ** 2).sum(axis=0) for rows in groups)
    out = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        if between[j] == 0.0 or np.all(X[:, j] == X[0, j]):
            out[j] = 0.0
        elif within[j] == 0.0:
            out[j] = math.inf
        else:
            out[j] = (between[j] / (k - 1)) / (within[j] / (n - k))
    return out


def rank_by_f(f_values) -> list[int]:
    """Column indices by descending F (inf first); ties keep column order."""
    return sorted(range(len(f_values)), key=lambda j: (-f_values[j], j))


def ablation_sweep(X_train, y_train, X_test, y_test, config: ForestConfig = ForestConfig(),
                   feature_names: Optional[Sequence[str]] = None):
    """Test accuracy when training on the top-n features by training-set F, n = 1..p.

    Selected columns keep their original order and every step uses the same
    seed, so the last step reproduces the full model exactly.
    Returns a list of (n, accuracy, added feature index).
    """
    X_train = np.asarray(X_train, dtype=float)
    X_test = np.asarray(X_test, dtype=float)
    p = X_train.shape[1]
    if p < 1:
        raise ValueError("need at least one feature")
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(p)]
    order = rank_by_f(anova_f(X_train, y_train))
    curve = []
    for n in range(1, p + 1):
        cols = sorted(order[:n])
        model = train_forest(X_train[:, cols], y_train, config, [names[c] for c in cols])
        report = evaluate(model, X_test[:, cols], y_test)
        curve.append((n, report.accuracy, order[n - 1]))
    return curve


# ---------------------------------------------------------------------------
# grid search

def stratified_folds(y, folds: int, seed: int = 0) -> list[np.ndarray]:
    y = encode_labels(y)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    minority = min(int((y == 0).sum()), int((y == 1).sum()))
    if folds > minority:
        raise ValueError(f"folds={folds} exceeds the minority class size {minority}")
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(y), dtype=np.int64)
    for cls in (0, 1):
        members = np.nonzero(y == cls)[0]
        members = members[rng.permutation(len(members))]
        assignment[members] = np.arange(len(members)) % folds
    return [np.nonzero(assignment == f)[0] for f in range(folds)]


def grid_search(X, y, grid: Sequence[dict], folds: int = 5, base: ForestConfig = ForestConfig()):
    """Cross-validated accuracy for every grid point.

    Returns (best config, list of (config, mean accuracy)). Ties prefer fewer
    trees, then shallower trees, then earlier grid points.
    """
    if not grid:
        raise ValueError("grid is empty")
    X = np.asarray(X, dtype=float)
    y_enc = encode_labels(y)
    points, seen = [], set()
    for g in grid:
        key = tuple(sorted(g.items()))
        if key not in seen:
            seen.add(key)
            points.append(replace(base, **g))
    fold_idx = stratified_folds(y_enc, folds, base.seed)
    results = []
    for cfg in points:
        accs = []
        for k in range(folds):
            test = fold_idx[k]
            train = np.concatenate([fold_idx[j] for j in range(folds) if j != k])
            model = train_forest(X[train], y_enc[train], cfg)
            accs.append(evaluate(model, X[test], y_enc[test]).accuracy)
        results.append((cfg, float(np.mean(accs))))

    def depth_key(cfg):
        return math.inf if cfg.max_depth is None else cfg.max_depth

    best_i = min(range(len(results)),
                 key=lambda i: (-results[i][1], results[i][0].n_trees, depth_key(results[i][0]), i))
    return results[best_i][0], results
