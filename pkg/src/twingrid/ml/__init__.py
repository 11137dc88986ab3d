"""Detection pipeline: ingestion, scaling, resampling, models, validation, metrics."""

from .cv import LstmTrainer, PrepConfig, RandomForestTrainer, holdout, kfold_cv, load_artifact, save_artifact
from .data import (LabeledDataset, ScalerParams, apply_zscore, clean_table, eda_report, label_and_merge,
                   load_dataset, pearson_matrix, zscore)
from .forest import ForestHyper, RandomForestModel, gini_importance, rf_predict, rf_train
from .lstm import LstmConfig, LstmModel, lstm_predict, lstm_train, make_sequences
from .metrics import ConfusionMatrix, CvReport, MetricsReport, evaluate
from .resample import gaussian_augment, smote, stratified_kfold_indices, stratified_split

__all__ = [
    "LabeledDataset", "ScalerParams", "clean_table", "label_and_merge", "load_dataset", "zscore",
    "apply_zscore", "eda_report", "pearson_matrix", "ForestHyper", "RandomForestModel", "rf_train",
    "rf_predict", "gini_importance", "LstmConfig", "LstmModel", "make_sequences", "lstm_train",
    "lstm_predict", "ConfusionMatrix", "MetricsReport", "CvReport", "evaluate", "smote",
    "gaussian_augment", "stratified_split", "stratified_kfold_indices", "PrepConfig",
    "RandomForestTrainer", "LstmTrainer", "kfold_cv", "holdout", "save_artifact", "load_artifact",
]
