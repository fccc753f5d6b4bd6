"""Two-tier stacking: tier-1 base classifiers, tier-2 logistic regression.

The combiner is trained on out-of-fold base probabilities: each training
row's tier-1 inputs come from base models fitted on the other folds only.
The final base models are then refitted on all training rows.
"""

from dataclasses import dataclass, field

import numpy as np

from .base import ClassifierError, ClassifierModel, LabeledDataset, encode_labels, model_from_state
from .boosting import train_gbt
from .linear import train_logreg, train_svm
from .trees import train_forest

BASE_KINDS = ("rf", "et", "gbt", "svm")


def train_classifier(kind, data, config=None):
    config = dict(config or {})
    if kind in ("rf", "et"):
        return train_forest(data, config, mode=kind)
    if kind == "gbt":
        return train_gbt(data, config)
    if kind == "svm":
        return train_svm(data, config)
    if kind == "logreg":
        return train_logreg(data, config)
    raise ClassifierError(f"unknown classifier kind {kind!r}")


@dataclass
class BaseSpec:
    """One tier-1 member: a classifier kind, its config, and optional input columns.

    ``columns`` is ``None`` (every feature), ``{"start": a, "stop": b}`` for a
    contiguous block, or an explicit list of column indices.
    """

    kind: str
    config: dict = field(default_factory=dict)
    columns: object = None
    name: str = ""

    @classmethod
    def coerce(cls, spec):
        if isinstance(spec, cls):
            return spec
        if isinstance(spec, str):
            return cls(spec)
        return cls(**spec)

    def as_dict(self):
        cols = self.columns
        if cols is not None and not isinstance(cols, dict):
            cols = [int(c) for c in cols]
        return {"kind": self.kind, "config": self.config, "columns": cols, "name": self.name or self.kind}


def _column_index(spec, n_features):
    if spec.columns is None:
        return np.arange(n_features)
    if isinstance(spec.columns, dict):
        return np.arange(int(spec.columns["start"]), int(spec.columns["stop"]))
    return np.asarray(list(spec.columns), dtype=np.int64)


def stratified_folds(labels, folds, seed=0):
    """Fold id per row: each class is shuffled and dealt round-robin across folds."""
    labels = np.asarray(labels)
    n = len(labels)
    if folds < 2:
        raise ClassifierError("stacking needs at least 2 folds")
    if folds > n:
        raise ClassifierError(f"{folds} folds requested for {n} rows")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        rows = rng.permutation(np.flatnonzero(labels == c))
        fold_of[rows] = (offset + np.arange(len(rows))) % folds
        offset += len(rows)
    classes = np.unique(labels)
    for f in range(folds):
        missing = np.setdiff1d(classes, labels[fold_of != f])
        if len(missing):
            raise ClassifierError(
                f"stratification failed: the training part of fold {f} has no rows of class {missing.tolist()}")
    return fold_of


class StackedEnsemble(ClassifierModel):
    kind = "stack"

    def __init__(self, classes, n_features, config, provenance=(), specs=(), bases=(), combiner=None,
                 oof=None, oof_fold=None, fold_train_ids=()):
        super().__init__(classes, n_features, config, provenance)
        self.specs = [BaseSpec.coerce(s) for s in specs]
        self.bases = list(bases)
        self.combiner = combiner
        self.oof = None if oof is None else np.asarray(oof, dtype=np.float64)
        self.oof_fold = None if oof_fold is None else np.asarray(oof_fold, dtype=np.int64)
        self.fold_train_ids = [tuple(ids) for ids in fold_train_ids]

    @property
    def folds(self):
        return self.config["folds"]

    def base_probabilities(self, X, bases=None):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        bases = self.bases if bases is None else bases
        cols = [_column_index(s, self.n_features) for s in self.specs]
        return np.hstack([m.predict_proba(X[:, c]) for m, c in zip(bases, cols)])

    def _proba(self, X):
        return self.combiner.predict_proba(self.base_probabilities(X))

    def _arrays(self):
        arrays = {"oof": self.oof, "oof_fold": self.oof_fold}
        for i, m in enumerate(self.bases):
            sub, _ = m.state()
            arrays.update({f"base{i}.{k}": v for k, v in sub.items()})
        sub, _ = self.combiner.state()
        arrays.update({f"combiner.{k}": v for k, v in sub.items()})
        return arrays

    def state(self):
        arrays, meta = super().state()
        meta["specs"] = [s.as_dict() for s in self.specs]
        meta["bases"] = [dict(m.state()[1], kind=m.kind) for m in self.bases]
        meta["combiner"] = dict(self.combiner.state()[1], kind=self.combiner.kind)
        meta["fold_train_ids"] = [list(ids) for ids in self.fold_train_ids]
        return arrays, meta

    @classmethod
    def from_state(cls, arrays, meta):
        def sub(prefix):
            return {k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)}

        bases = [model_from_state(bm["kind"], sub(f"base{i}."), bm) for i, bm in enumerate(meta["bases"])]
        combiner = model_from_state("logreg", sub("combiner."), meta["combiner"])
        specs = []
        for s in meta["specs"]:
            specs.append(BaseSpec(s["kind"], s["config"], s["columns"], s["name"]))
        return cls(np.asarray(meta["classes"], dtype=np.int64), meta["n_features"], meta["config"],
                   tuple(meta["provenance"]), specs, bases, combiner, arrays["oof"], arrays["oof_fold"],
                   meta["fold_train_ids"])


def train_stack(data: LabeledDataset, base_specs, folds=5, seed=0, combiner_config=None):
    """Out-of-fold stacking of ``base_specs`` with a logistic-regression combiner."""
    data.check_trainable()
    specs = [BaseSpec.coerce(s) for s in base_specs]
    if not specs:
        raise ClassifierError("stacking needs at least one base model")
    classes, _ = encode_labels(data.labels)
    n_classes = len(classes)
    fold_of = stratified_folds(data.labels, folds, seed)
    cols = [_column_index(s, data.n_features) for s in specs]
    oof = np.zeros((len(data), len(specs) * n_classes))
    fold_train_ids = []
    for f in range(folds):
        train_rows = np.flatnonzero(fold_of != f)
        test_rows = np.flatnonzero(fold_of == f)
        part = data.subset(train_rows)
        fold_train_ids.append(part.ids)
        for b, (spec, c) in enumerate(zip(specs, cols)):
            model = train_classifier(spec.kind, part.columns(c), spec.config)
            if not np.array_equal(model.classes, classes):
                raise ClassifierError(f"fold {f} base {spec.kind} saw classes {model.classes.tolist()}")
            oof[test_rows, b * n_classes:(b + 1) * n_classes] = model.predict_proba(data.features[np.ix_(test_rows, c)])
    combiner = train_logreg(LabeledDataset(oof, data.labels, data.ids), combiner_config)
    bases = [train_classifier(s.kind, data.columns(c), s.config) for s, c in zip(specs, cols)]
    config = {"folds": folds, "seed": seed, "combiner": combiner.config}
    return StackedEnsemble(classes, data.n_features, config, tuple(data.ids), specs, bases, combiner,
                           oof, fold_of, fold_train_ids)
