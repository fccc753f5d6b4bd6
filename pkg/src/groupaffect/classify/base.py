"""Dataset container and the shared classifier model interface."""

from dataclasses import dataclass, field

import numpy as np

from .. import serialization

LABEL_NAMES = ("negative", "neutral", "positive")


class ClassifierError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    ids: tuple = ()

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        if X.ndim != 2:
            raise ClassifierError(f"features must be 2-D, got shape {X.shape}")
        y = np.asarray(self.labels)
        if y.shape != (X.shape[0],):
            raise ClassifierError(f"{X.shape[0]} feature rows but {y.size} labels")
        if not np.issubdtype(y.dtype, np.integer):
            if not np.all(y == np.round(y)):
                raise ClassifierError("labels must be integer class ids")
        ids = tuple(self.ids) if len(self.ids) else tuple(str(i) for i in range(X.shape[0]))
        if len(ids) != X.shape[0]:
            raise ClassifierError(f"{X.shape[0]} feature rows but {len(ids)} ids")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y.astype(np.int64))
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def subset(self, rows):
        rows = np.asarray(rows)
        return LabeledDataset(self.features[rows], self.labels[rows], tuple(self.ids[i] for i in rows))

    def columns(self, cols):
        return LabeledDataset(self.features[:, cols], self.labels, self.ids)

    def check_trainable(self):
        if len(self) == 0:
            raise ClassifierError("empty training set")
        if len(np.unique(self.labels)) < 2:
            raise ClassifierError("training data has a single class")
        if not np.all(np.isfinite(self.features)):
            raise ClassifierError("training features contain non-finite values")


def softmax(scores):
    scores = np.asarray(scores, dtype=np.float64)
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(eq=False)
class ClassifierModel:
    """Common surface of every trained classifier.

    Subclasses define ``kind``, implement ``_proba`` for a 2-D input and
    ``_arrays``/``_from_arrays`` for persistence.
    """

    classes: np.ndarray
    n_features: int
    config: dict = field(default_factory=dict)
    provenance: tuple = ()

    kind = ""

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise ClassifierError(f"model expects {self.n_features} features, got {X.shape[1]}")
        p = self._proba(X)
        return p[0] if single else p

    def predict(self, X):
        p = self.predict_proba(X)
        return np.asarray(self.classes)[np.argmax(p, axis=-1)]

    def _proba(self, X):
        raise NotImplementedError

    def _arrays(self):
        raise NotImplementedError

    @classmethod
    def _from_arrays(cls, arrays, classes, n_features, config, provenance):
        raise NotImplementedError

    def state(self):
        meta = {
            "classes": [int(c) for c in self.classes],
            "n_features": int(self.n_features),
            "config": self.config,
            "provenance": list(self.provenance),
        }
        return self._arrays(), meta

    def save(self, path):
        arrays, meta = self.state()
        return serialization.save_model(path, self.kind, len(self.classes), self.n_features, arrays, meta)


def model_from_state(kind, arrays, meta):
    from .registry import MODEL_TYPES

    if kind == "stack":
        return MODEL_TYPES[kind].from_state(arrays, meta)
    if kind not in MODEL_TYPES:
        raise serialization.ModelFormatError(f"no classifier of kind {kind!r}")
    return MODEL_TYPES[kind]._from_arrays(
        arrays, np.asarray(meta["classes"], dtype=np.int64), meta["n_features"],
        meta["config"], tuple(meta["provenance"]),
    )


def load_classifier(path):
    kind, _, _, arrays, meta = serialization.load_model_file(path)
    return model_from_state(kind, arrays, meta)


def encode_labels(labels):
    """``(classes, index)`` with ``classes`` sorted and ``labels == classes[index]``."""
    classes, index = np.unique(labels, return_inverse=True)
    return classes.astype(np.int64), index.astype(np.int64)
