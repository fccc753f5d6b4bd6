"""Linear classifiers: one-vs-rest hinge-loss SVM and multinomial logistic regression."""

from dataclasses import asdict, dataclass

import numpy as np

from .base import ClassifierError, ClassifierModel, LabeledDataset, encode_labels, softmax
from .trees import _as_config


@dataclass
class SvmConfig:
    C: float = 1.0
    epochs: int = 50
    eta0: float = 0.5
    seed: int = 0


@dataclass
class LogRegConfig:
    l2: float = 1e-4
    epochs: int = 500
    lr: float = 0.5


class LinearSVM(ClassifierModel):
    """One-vs-rest linear SVM on standardized features.

    Probabilities are the softmax of the per-class margins, a calibration
    shortcut rather than a fitted probability model.
    """

    kind = "svm"

    def __init__(self, classes, n_features, config, provenance=(), mean=None, scale=None,
                 weights=None, bias=None):
        super().__init__(classes, n_features, config, provenance)
        self.mean = np.asarray(mean, dtype=np.float64)
        self.scale = np.asarray(scale, dtype=np.float64)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)

    def decision_function(self, X):
        return ((np.atleast_2d(X) - self.mean) / self.scale) @ self.weights + self.bias

    def _proba(self, X):
        return softmax(self.decision_function(X))

    def _arrays(self):
        return {"mean": self.mean, "scale": self.scale, "weights": self.weights, "bias": self.bias}

    @classmethod
    def _from_arrays(cls, arrays, classes, n_features, config, provenance):
        return cls(classes, n_features, config, provenance, arrays["mean"], arrays["scale"],
                   arrays["weights"], arrays["bias"])


def standardizer(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    return mean, np.where(scale > 0, scale, 1.0)


def train_svm(data: LabeledDataset, config=None, **overrides):
    """Averaged SGD on ``lam/2 |w|^2 + mean hinge``, ``lam = 1 / (C n)``.

    Rows are visited in a seeded permutation each epoch with step
    ``eta0 / (1 + eta0 * lam * t)``; weights are averaged over the second
    half of the epochs. The bias is not regularized.
    """
    config = _as_config(SvmConfig, config, overrides)
    if not config.C > 0 or config.epochs < 1:
        raise ClassifierError("C must be positive and epochs >= 1")
    data.check_trainable()
    classes, y = encode_labels(data.labels)
    mean, scale = standardizer(data.features)
    Z = (data.features - mean) / scale
    n, f = Z.shape
    signs = np.where(np.eye(len(classes))[y] > 0, 1.0, -1.0)
    lam = 1.0 / (config.C * n)
    rng = np.random.default_rng(config.seed)
    W = np.zeros((f, len(classes)))
    b = np.zeros(len(classes))
    W_avg, b_avg, n_avg = np.zeros_like(W), np.zeros_like(b), 0
    start_avg = config.epochs // 2
    t = 0
    for epoch in range(config.epochs):
        for i in rng.permutation(n):
            eta = config.eta0 / (1.0 + config.eta0 * lam * t)
            x, s = Z[i], signs[i]
            active = s * (x @ W + b) < 1.0
            W *= 1.0 - eta * lam
            if active.any():
                W[:, active] += eta * np.outer(x, s[active])
                b[active] += eta * s[active]
            t += 1
            if epoch >= start_avg:
                W_avg += W
                b_avg += b
                n_avg += 1
    return LinearSVM(classes, data.n_features, asdict(config), tuple(data.ids), mean, scale,
                     W_avg / n_avg, b_avg / n_avg)


class LogisticRegression(ClassifierModel):
    kind = "logreg"

    def __init__(self, classes, n_features, config, provenance=(), weights=None, bias=None,
                 loss_history=()):
        super().__init__(classes, n_features, config, provenance)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        self.loss_history = np.asarray(loss_history, dtype=np.float64)

    @classmethod
    def zeros(cls, classes, n_features):
        classes = np.asarray(classes, dtype=np.int64)
        return cls(classes, n_features, asdict(LogRegConfig()), (),
                   np.zeros((n_features, len(classes))), np.zeros(len(classes)))

    def _proba(self, X):
        return softmax(X @ self.weights + self.bias)

    def _arrays(self):
        return {"weights": self.weights, "bias": self.bias, "loss_history": self.loss_history}

    @classmethod
    def _from_arrays(cls, arrays, classes, n_features, config, provenance):
        return cls(classes, n_features, config, provenance, arrays["weights"], arrays["bias"],
                   arrays["loss_history"])


def logistic_loss_grad(W, b, X, y, l2):
    """Mean cross-entropy plus ``l2/2 |W|^2``, and its gradient in ``W`` and ``b``."""
    n = X.shape[0]
    scores = X @ W + b
    z = scores - scores.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    loss = float(-(z[np.arange(n), y] - log_norm).mean() + 0.5 * l2 * np.sum(W * W))
    delta = np.exp(z - log_norm[:, None])
    delta[np.arange(n), y] -= 1.0
    delta /= n
    return loss, X.T @ delta + l2 * W, delta.sum(axis=0)


def train_logreg(data: LabeledDataset, config=None, **overrides):
    """Full-batch gradient descent from zero weights.

    A step that would increase the loss is retried at half the learning
    rate, so the recorded loss sequence never increases.
    """
    config = _as_config(LogRegConfig, config, overrides)
    if not config.lr > 0 or config.epochs < 0 or config.l2 < 0:
        raise ClassifierError("need lr > 0, epochs >= 0, l2 >= 0")
    data.check_trainable()
    classes, y = encode_labels(data.labels)
    X = data.features
    W = np.zeros((X.shape[1], len(classes)))
    b = np.zeros(len(classes))
    lr = config.lr
    loss, gW, gb = logistic_loss_grad(W, b, X, y, config.l2)
    history = [loss]
    for _ in range(config.epochs):
        while True:
            W_new, b_new = W - lr * gW, b - lr * gb
            new_loss, new_gW, new_gb = logistic_loss_grad(W_new, b_new, X, y, config.l2)
            if new_loss <= loss or lr < 1e-12:
                break
            lr *= 0.5
        if new_loss > loss:
            break
        W, b, loss, gW, gb = W_new, b_new, new_loss, new_gW, new_gb
        history.append(loss)
    return LogisticRegression(classes, data.n_features, asdict(config), tuple(data.ids), W, b, history)
