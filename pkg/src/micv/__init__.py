"""Cross-validated calibration of logistic prediction rules with multiple imputation."""

__version__ = "0.1.0"

from .cv import (
    AnalysisError,
    FoldAssignment,
    PredictionMatrix,
    approach1,
    approach2,
    approach3,
    make_folds,
    mask_fold_outcomes,
    summarize,
)
from .dataset import Dataset, ImputedDataset
from .glm import CoefficientVector, FitDiagnostics, draw_coefficients, fit_logistic, predict_proba
from .imputation import ImputationConfig, impute_once
