"""Accuracy, per-class accuracy and confusion matrices."""

import numpy as np

from .base import LabeledDataset

DEFAULT_CLASSES = (0, 1, 2)


def confusion_matrix(labels, predictions, classes):
    """Counts with rows indexed by true class and columns by predicted class."""
    index = {int(c): i for i, c in enumerate(classes)}
    out = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(labels, predictions):
        out[index[int(t)], index[int(p)]] += 1
    return out


def score_predictions(labels, predictions, classes=None):
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if classes is None:
        seen = set(labels.tolist()) | set(predictions.tolist())
        classes = DEFAULT_CLASSES if seen <= set(DEFAULT_CLASSES) else tuple(sorted(seen))
    cm = confusion_matrix(labels, predictions, classes)
    support = cm.sum(axis=1)
    per_class = [float(cm[i, i] / support[i]) if support[i] else None for i in range(len(classes))]
    return {
        "accuracy": float(np.trace(cm) / max(1, len(labels))),
        "per_class_accuracy": per_class,
        "confusion": cm.tolist(),
        "classes": [int(c) for c in classes],
        "n": int(len(labels)),
    }


def evaluate(model, data: LabeledDataset, classes=None):
    """Score any fitted model (or ensemble) exposing ``predict`` on ``data``."""
    return score_predictions(data.labels, model.predict(data.features), classes)
