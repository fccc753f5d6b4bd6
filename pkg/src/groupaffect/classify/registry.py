from .boosting import GradientBoosting
from .linear import LinearSVM, LogisticRegression
from .stacking import StackedEnsemble
from .trees import Forest

MODEL_TYPES = {
    "rf": Forest,
    "et": Forest,
    "gbt": GradientBoosting,
    "svm": LinearSVM,
    "logreg": LogisticRegression,
    "stack": StackedEnsemble,
}
