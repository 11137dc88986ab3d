"""Confusion matrix and the four detection metrics.

The positive class is 1 (attack).  Precision, recall and F1 fall back to 0
with a warning when their denominator vanishes, so fold aggregation never
sees NaN.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError

METRICS = ("accuracy", "precision", "recall", "f1")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def as_array(self) -> np.ndarray:
        """Rows are actual (0, 1), columns predicted (0, 1)."""
        return np.array([[self.tn, self.fp], [self.fn, self.tp]], dtype=np.int64)


def _ratio(num: float, den: float, what: str) -> float:
    if den == 0:
        warnings.warn(f"{what} undefined (zero denominator); reporting 0", RuntimeWarning, stacklevel=3)
        return 0.0
    return num / den


@dataclass(frozen=True)
class MetricsReport:
    matrix: ConfusionMatrix
    accuracy: float
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_matrix(cls, cm: ConfusionMatrix) -> "MetricsReport":
        acc = _ratio(cm.tp + cm.tn, cm.total, "accuracy")
        prec = _ratio(cm.tp, cm.tp + cm.fp, "precision")
        rec = _ratio(cm.tp, cm.tp + cm.fn, "recall")
        f1 = _ratio(2 * prec * rec, prec + rec, "F1")
        return cls(cm, acc, prec, rec, f1)

    def as_dict(self) -> dict:
        return {"tp": self.matrix.tp, "tn": self.matrix.tn, "fp": self.matrix.fp, "fn": self.matrix.fn,
                "accuracy": self.accuracy, "precision": self.precision, "recall": self.recall,
                "f1": self.f1}

    @classmethod
    def from_dict(cls, d) -> "MetricsReport":
        cm = ConfusionMatrix(int(d["tp"]), int(d["tn"]), int(d["fp"]), int(d["fn"]))
        return cls(cm, float(d["accuracy"]), float(d["precision"]), float(d["recall"]), float(d["f1"]))


def confusion_matrix(y_true, y_pred) -> ConfusionMatrix:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ShapeError(f"label arrays differ in shape: {y_true.shape} vs {y_pred.shape}")
    for arr in (y_true, y_pred):
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("labels must be binary 0/1")
    t = y_true == 1
    p = y_pred == 1
    return ConfusionMatrix(tp=int(np.sum(t & p)), tn=int(np.sum(~t & ~p)),
                           fp=int(np.sum(~t & p)), fn=int(np.sum(t & ~p)))


def evaluate(y_true, y_pred) -> MetricsReport:
    return MetricsReport.from_matrix(confusion_matrix(y_true, y_pred))


@dataclass(frozen=True)
class CvReport:
    folds: tuple[MetricsReport, ...]
    k: int
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)

    @classmethod
    def from_folds(cls, folds) -> "CvReport":
        folds = tuple(folds)
        mean, std = {}, {}
        for m in METRICS:
            vals = np.array([getattr(r, m) for r in folds], dtype=float)
            mean[m] = float(np.mean(vals))
            # sample std across folds
            std[m] = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        return cls(folds, len(folds), mean, std)

    def as_dict(self) -> dict:
        return {"k": self.k, "mean": dict(self.mean), "std": dict(self.std),
                "folds": [r.as_dict() for r in self.folds]}

    @classmethod
    def from_dict(cls, d) -> "CvReport":
        return cls(tuple(MetricsReport.from_dict(r) for r in d["folds"]), int(d["k"]),
                   {k: float(v) for k, v in d["mean"].items()}, {k: float(v) for k, v in d["std"].items()})

