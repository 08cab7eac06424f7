"""From-scratch learners and the dual-layer ensemble classifier."""

from .ensemble import (
    CasePrediction,
    DualLayerConfig,
    DualLayerModel,
    EvalReport,
    evaluate,
    predict_dual,
    soft_vote,
    train_dual,
    tune_dual,
)
from .forest import ForestParams, RandomForestModel, rf_predict_proba, train_random_forest
from .mlp import MlpModel, MlpParams, train_mlp
from .modelio import load_model, save_model
from .svm import SvmModel, SvmParams, train_svm_ovr

__all__ = [
    "CasePrediction",
    "DualLayerConfig",
    "DualLayerModel",
    "EvalReport",
    "ForestParams",
    "MlpModel",
    "MlpParams",
    "RandomForestModel",
    "SvmModel",
    "SvmParams",
    "evaluate",
    "load_model",
    "predict_dual",
    "rf_predict_proba",
    "save_model",
    "soft_vote",
    "train_dual",
    "train_mlp",
    "train_random_forest",
    "train_svm_ovr",
    "tune_dual",
]
