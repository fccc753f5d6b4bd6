"""Tier-1 classifiers, the tier-2 stacker, and evaluation."""

from .base import ClassifierError, ClassifierModel, LabeledDataset, LABEL_NAMES, load_classifier
from .boosting import GbtConfig, GradientBoosting, train_gbt
from .linear import (LinearSVM, LogisticRegression, LogRegConfig, SvmConfig, logistic_loss_grad,
                     train_logreg, train_svm)
from .metrics import confusion_matrix, evaluate, score_predictions
from .stacking import BASE_KINDS, BaseSpec, StackedEnsemble, stratified_folds, train_classifier, train_stack
from .trees import Forest, ForestConfig, train_forest


def predict_proba(model, features):
    return model.predict_proba(features)


__all__ = [
    "BASE_KINDS", "BaseSpec", "ClassifierError", "ClassifierModel", "Forest", "ForestConfig",
    "GbtConfig", "GradientBoosting", "LABEL_NAMES", "LabeledDataset", "LinearSVM", "LogRegConfig",
    "LogisticRegression", "StackedEnsemble", "SvmConfig", "confusion_matrix", "evaluate",
    "load_classifier", "logistic_loss_grad", "predict_proba", "score_predictions",
    "stratified_folds", "train_classifier", "train_forest", "train_gbt", "train_logreg",
    "train_stack", "train_svm",
]
