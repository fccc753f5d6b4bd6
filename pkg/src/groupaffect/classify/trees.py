"""CART trees, random forests and extra trees.

Trees are stored as flat node arrays; a node with ``feature == -1`` is a
leaf and a row goes left when ``x[feature] <= threshold``. Split search runs
in the backend kernels; ties go to the lowest feature index, then the lowest
threshold.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .._backend import kernels
from .base import ClassifierError, ClassifierModel, LabeledDataset, encode_labels


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X):
        return kernels.tree_apply(X, self.feature, self.threshold, self.left, self.right)

    def predict_value(self, X):
        return self.value[self.apply(X)]


class _TreeBuilder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def add(self, value):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.feature) - 1

    def split(self, node, feature, threshold, left, right):
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.left[node] = left
        self.right[node] = right

    def finish(self):
        return Tree(
            np.asarray(self.feature, dtype=np.int64),
            np.asarray(self.threshold, dtype=np.float64),
            np.asarray(self.left, dtype=np.int64),
            np.asarray(self.right, dtype=np.int64),
            np.asarray(self.value, dtype=np.float64),
        )


def _midpoint(lo, hi):
    mid = lo + (hi - lo) / 2.0
    return lo if mid >= hi else mid


def _presorted(X, rows, feats, *columns):
    sub = X[np.ix_(rows, feats)]
    order = np.argsort(sub, axis=0, kind="stable")
    return (np.take_along_axis(sub, order, axis=0),) + tuple(c[rows][order] for c in columns)


def build_classification_tree(X, y, w, n_classes, rng, max_depth=16, min_leaf=1, mtry=None, mode="rf"):
    """Grow a Gini tree on rows with positive integer weight ``w``.

    ``mode="rf"`` searches every cut point of ``mtry`` random features;
    ``mode="et"`` draws one uniform threshold per candidate feature.
    """
    n_features = X.shape[1]
    mtry = n_features if mtry is None else min(mtry, n_features)
    builder = _TreeBuilder()
    root_rows = np.flatnonzero(w > 0)
    stack = [(root_rows, 0, builder.add(None))]
    while stack:
        rows, depth, node = stack.pop()
        counts = np.bincount(y[rows], weights=w[rows], minlength=n_classes)
        total = counts.sum()
        builder.value[node] = counts / total
        if depth >= max_depth or np.count_nonzero(counts) < 2 or total < 2 * min_leaf:
            continue
        feats = np.sort(rng.choice(n_features, size=mtry, replace=False))
        if mode == "rf":
            Xs, Ys, Ws = _presorted(X, rows, feats, y, w)
            col, pos, _ = kernels.gini_best_split(Xs, Ys, Ws, n_classes, min_leaf)
            if col < 0:
                continue
            thr = _midpoint(Xs[pos, col], Xs[pos + 1, col])
        elif mode == "et":
            sub = X[np.ix_(rows, feats)]
            lo, hi = sub.min(axis=0), sub.max(axis=0)
            thr_all = lo + rng.random(mtry) * (hi - lo)
            thr_all = np.where(thr_all >= hi, lo, thr_all)
            scores = kernels.gini_threshold_scores(sub, y[rows], w[rows], thr_all, n_classes, min_leaf)
            scores[lo == hi] = np.inf
            col = int(np.argmin(scores))
            if not np.isfinite(scores[col]):
                continue
            thr = thr_all[col]
        else:
            raise ClassifierError(f"unknown forest mode {mode!r}")
        feat = int(feats[col])
        go_left = X[rows, feat] <= thr
        left = builder.add(None)
        right = builder.add(None)
        builder.split(node, feat, float(thr), left, right)
        # right pushed first so the left subtree is numbered first
        stack.append((rows[~go_left], depth + 1, right))
        stack.append((rows[go_left], depth + 1, left))
    return builder.finish()


def build_regression_tree(X, grad, hess, max_depth=3, min_leaf=1, l2=1.0, rows=None):
    """Second-order regression tree; leaf value ``-G / (H + l2)``."""
    builder = _TreeBuilder()
    rows = np.arange(X.shape[0]) if rows is None else rows
    feats = np.arange(X.shape[1])
    stack = [(rows, 0, builder.add(None))]
    while stack:
        rows, depth, node = stack.pop()
        g, h = grad[rows].sum(), hess[rows].sum()
        builder.value[node] = [-g / (h + l2)]
        if depth >= max_depth or len(rows) < 2 * min_leaf:
            continue
        Xs, Gs, Hs = _presorted(X, rows, feats, grad, hess)
        col, pos, score = kernels.newton_best_split(Xs, Gs, Hs, l2, min_leaf)
        gain = score - g * g / (h + l2)
        if col < 0 or not gain > 1e-12:
            continue
        thr = _midpoint(Xs[pos, col], Xs[pos + 1, col])
        go_left = X[rows, col] <= thr
        left = builder.add(None)
        right = builder.add(None)
        builder.split(node, int(col), float(thr), left, right)
        stack.append((rows[~go_left], depth + 1, right))
        stack.append((rows[go_left], depth + 1, left))
    return builder.finish()


def pack_trees(trees, prefix=""):
    sizes = np.array([t.n_nodes for t in trees], dtype=np.int64)
    cat = {name: np.concatenate([getattr(t, name) for t in trees]) for name in
           ("feature", "threshold", "left", "right", "value")}
    return {prefix + "tree_sizes": sizes, **{prefix + k: v for k, v in cat.items()}}


def unpack_trees(arrays, prefix=""):
    trees, start = [], 0
    for size in arrays[prefix + "tree_sizes"]:
        sl = slice(start, start + int(size))
        trees.append(Tree(*(arrays[prefix + k][sl] for k in ("feature", "threshold", "left", "right", "value"))))
        start += int(size)
    return trees


@dataclass
class ForestConfig:
    trees: int = 300
    max_depth: int = 16
    min_leaf: int = 1
    # int, or "sqrt" for floor(sqrt(F)), or None for all features
    mtry: object = "sqrt"
    mode: str = "rf"
    seed: int = 0

    def resolve_mtry(self, n_features):
        if self.mtry is None:
            return n_features
        if self.mtry == "sqrt":
            return max(1, int(np.sqrt(n_features)))
        return max(1, min(int(self.mtry), n_features))


class Forest(ClassifierModel):
    def __init__(self, classes, n_features, config, provenance=(), trees=()):
        super().__init__(classes, n_features, config, provenance)
        self.trees = list(trees)

    @property
    def kind(self):
        return self.config.get("mode", "rf")

    def _proba(self, X):
        total = np.zeros((X.shape[0], len(self.classes)))
        for tree in self.trees:
            total += tree.predict_value(X)
        return total / len(self.trees)

    def _arrays(self):
        return pack_trees(self.trees)

    @classmethod
    def _from_arrays(cls, arrays, classes, n_features, config, provenance):
        return cls(classes, n_features, config, provenance, unpack_trees(arrays))


def _as_config(cls, config, overrides):
    if config is None:
        config = cls()
    elif isinstance(config, dict):
        config = cls(**config)
    if overrides:
        config = cls(**{**asdict(config), **overrides})
    return config


def train_forest(data: LabeledDataset, config=None, **overrides):
    """Random forest (``mode="rf"``) or extra trees (``mode="et"``).

    Tree ``t`` draws from its own generator seeded by ``(seed, t)``.
    """
    config = _as_config(ForestConfig, config, overrides)
    if config.trees < 1:
        raise ClassifierError("a forest needs at least one tree")
    if config.mode not in ("rf", "et"):
        raise ClassifierError(f"unknown forest mode {config.mode!r}")
    data.check_trainable()
    classes, y = encode_labels(data.labels)
    n = len(data)
    mtry = config.resolve_mtry(data.n_features)
    trees = []
    for t in range(config.trees):
        rng = np.random.default_rng([config.seed, t])
        if config.mode == "rf":
            w = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.int64)
        else:
            w = np.ones(n, dtype=np.int64)
        trees.append(build_classification_tree(
            data.features, y, w, len(classes), rng,
            max_depth=config.max_depth, min_leaf=config.min_leaf, mtry=mtry, mode=config.mode))
    return Forest(classes, data.n_features, asdict(config), tuple(data.ids), trees)
