"""Multiclass gradient-boosted trees with a softmax link.

Each round fits one second-order regression tree per class to the softmax
cross-entropy gradients. Scores start at the log class frequencies, so a
zero-round model predicts the training class distribution.

A round whose step would raise the training log-loss is halved until it
does not (up to 30 times, else dropped); the per-round multiplier is kept
in ``step_scale`` so prediction replays training exactly.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .base import ClassifierError, ClassifierModel, LabeledDataset, encode_labels, softmax
from .trees import _as_config, build_regression_tree, pack_trees, unpack_trees

_MAX_HALVINGS = 30


@dataclass
class GbtConfig:
    rounds: int = 200
    learning_rate: float = 0.1
    max_depth: int = 3
    min_leaf: int = 1
    l2: float = 1.0
    subsample: float = 1.0
    seed: int = 0


def log_loss(scores, y):
    z = scores - scores.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-log_p[np.arange(len(y)), y].mean())


class GradientBoosting(ClassifierModel):
    kind = "gbt"

    def __init__(self, classes, n_features, config, provenance=(), init_scores=None,
                 trees=(), step_scale=(), loss_history=()):
        super().__init__(classes, n_features, config, provenance)
        self.init_scores = np.asarray(init_scores, dtype=np.float64)
        # trees[r * n_classes + c] is round r, class c
        self.trees = list(trees)
        self.step_scale = np.asarray(step_scale, dtype=np.float64)
        self.loss_history = np.asarray(loss_history, dtype=np.float64)

    @property
    def rounds(self):
        return len(self.step_scale)

    def decision_function(self, X, rounds=None):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        n_classes = len(self.classes)
        scores = np.tile(self.init_scores, (X.shape[0], 1))
        lr = self.config["learning_rate"]
        for r in range(self.rounds if rounds is None else rounds):
            if self.step_scale[r] == 0:
                continue
            for c in range(n_classes):
                tree = self.trees[r * n_classes + c]
                scores[:, c] += lr * self.step_scale[r] * tree.predict_value(X)[:, 0]
        return scores

    def _proba(self, X):
        return softmax(self.decision_function(X))

    def _arrays(self):
        arrays = {"init_scores": self.init_scores, "step_scale": self.step_scale,
                  "loss_history": self.loss_history}
        if self.trees:
            arrays.update(pack_trees(self.trees))
        return arrays

    @classmethod
    def _from_arrays(cls, arrays, classes, n_features, config, provenance):
        trees = unpack_trees(arrays) if "tree_sizes" in arrays else []
        return cls(classes, n_features, config, provenance, arrays["init_scores"], trees,
                   arrays["step_scale"], arrays["loss_history"])


def train_gbt(data: LabeledDataset, config=None, **overrides):
    config = _as_config(GbtConfig, config, overrides)
    if config.rounds < 0 or not config.learning_rate > 0:
        raise ClassifierError("rounds must be >= 0 and learning_rate > 0")
    data.check_trainable()
    classes, y = encode_labels(data.labels)
    X = data.features
    n, n_classes = len(y), len(classes)
    onehot = np.eye(n_classes)[y]
    init = np.log(np.bincount(y, minlength=n_classes) / n)
    scores = np.tile(init, (n, 1))
    loss = log_loss(scores, y)
    history = [loss]
    rng = np.random.default_rng(config.seed)
    trees, scales = [], []
    for _ in range(config.rounds):
        p = softmax(scores)
        grad = p - onehot
        hess = p * (1.0 - p)
        rows = None
        if config.subsample < 1.0:
            m = max(2, int(round(config.subsample * n)))
            rows = np.sort(rng.choice(n, size=m, replace=False))
        update = np.zeros_like(scores)
        for c in range(n_classes):
            tree = build_regression_tree(X, grad[:, c], hess[:, c], max_depth=config.max_depth,
                                         min_leaf=config.min_leaf, l2=config.l2, rows=rows)
            trees.append(tree)
            update[:, c] = tree.predict_value(X)[:, 0]
        scale = 1.0
        for _ in range(_MAX_HALVINGS):
            trial = scores + config.learning_rate * scale * update
            trial_loss = log_loss(trial, y)
            if trial_loss <= loss:
                break
            scale *= 0.5
        else:
            scale, trial, trial_loss = 0.0, scores, loss
        scores, loss = trial, trial_loss
        scales.append(scale)
        history.append(loss)
    return GradientBoosting(classes, data.n_features, asdict(config), tuple(data.ids), init, trees,
                            scales, history)
