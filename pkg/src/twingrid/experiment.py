"""Side-by-side detection experiment: {RF, LSTM} x {without DT, with DT}."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError
from .ml.cv import LstmTrainer, PrepConfig, RandomForestTrainer, holdout, kfold_cv
from .ml.data import LabeledDataset
from .ml.forest import ForestHyper
from .ml.lstm import LstmConfig
from .ml.metrics import METRICS, CvReport, MetricsReport

MODELS = ("RF", "LSTM")
FEATURE_SETS = ("without_dt", "with_dt")
FEATURE_LABELS = {"without_dt": "without DT", "with_dt": "with DT"}

# Published reference values, shown next to our numbers for comparison only.
REFERENCE = {
    ("RF", "without_dt"): {"accuracy": 0.7434, "precision": 0.73, "recall": 0.77, "f1": 0.75},
    ("LSTM", "without_dt"): {"accuracy": 0.8688, "precision": 0.8325, "recall": 0.8183, "f1": 0.8254},
    ("RF", "with_dt"): {"accuracy": 0.8692, "precision": 0.7380, "recall": 0.8748, "f1": 0.8006},
    ("LSTM", "with_dt"): {"accuracy": 0.9159, "precision": 0.9417, "recall": 0.8669, "f1": 0.9028},
}


@dataclass(frozen=True)
class ExperimentConfig:
    models: tuple[str, ...] = MODELS
    features: tuple[str, ...] = FEATURE_SETS
    folds: int = 10
    seed: int = 42
    holdout_frac: float = 0.2
    prep: PrepConfig = PrepConfig()
    forest: ForestHyper = ForestHyper()
    lstm: LstmConfig = LstmConfig()
    window: int = 20
    stride: int = 20

    def __post_init__(self):
        for m in self.models:
            if m not in MODELS:
                raise ParameterError(f"unknown model {m!r}; choose from {MODELS}")
        for f in self.features:
            if f not in FEATURE_SETS:
                raise ParameterError(f"unknown feature set {f!r}; choose from {FEATURE_SETS}")
        if self.folds < 2:
            raise ParameterError("folds must be at least 2")

    def trainer(self, model: str):
        if model == "RF":
            return RandomForestTrainer(self.forest)
        return LstmTrainer(self.lstm, self.window, self.stride)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["models"] = list(self.models)
        d["features"] = list(self.features)
        return d


@dataclass(frozen=True, eq=False)
class Cell:
    model: str
    features: str
    cv: CvReport
    holdout: MetricsReport | None = None

    def as_dict(self) -> dict:
        return {"model": self.model, "features": self.features, "cv": self.cv.as_dict(),
                "holdout": None if self.holdout is None else self.holdout.as_dict()}

    @classmethod
    def from_dict(cls, d) -> "Cell":
        ho = None if d.get("holdout") is None else MetricsReport.from_dict(d["holdout"])
        return cls(d["model"], d["features"], CvReport.from_dict(d["cv"]), ho)


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    cells: tuple[Cell, ...]
    config: dict = field(default_factory=dict)

    def cell(self, model: str, features: str) -> Cell:
        for c in self.cells:
            if c.model == model and c.features == features:
                return c
        raise KeyError((model, features))

    def f1_gain(self, model: str) -> float:
        return self.cell(model, "with_dt").cv.mean["f1"] - self.cell(model, "without_dt").cv.mean["f1"]

    def as_dict(self) -> dict:
        return {"config": self.config, "cells": [c.as_dict() for c in self.cells],
                "reference": [{"model": m, "features": f, **v} for (m, f), v in REFERENCE.items()]}

    @classmethod
    def from_dict(cls, d) -> "ExperimentReport":
        return cls(tuple(Cell.from_dict(c) for c in d["cells"]), d.get("config", {}))

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=1, sort_keys=True) + "\n"

    def render(self) -> str:
        return render_table(self)


def run_experiment(plain: LabeledDataset, dt: LabeledDataset | None,
                   config: ExperimentConfig = ExperimentConfig(), log=None) -> ExperimentReport:
    """Cross-validate (and hold out) every requested model on every feature set."""
    sets = {"without_dt": plain, "with_dt": dt}
    for f in config.features:
        if sets[f] is None:
            raise ParameterError(f"feature set {f!r} requested but no dataset given")
    if dt is not None and "with_dt" in config.features and "without_dt" in config.features:
        if not np.array_equal(plain.y, dt.y):
            raise ShapeError("plain and DT datasets disagree on labels")
    cells = []
    for model in config.models:
        trainer = config.trainer(model)
        for f in config.features:
            data = sets[f]
            if log:
                log(f"{model} / {FEATURE_LABELS[f]}: {config.folds}-fold CV")
            cv = kfold_cv(data, config.folds, trainer, config.seed, config.prep)
            ho = None
            if config.holdout_frac > 0:
                if log:
                    log(f"{model} / {FEATURE_LABELS[f]}: held-out split")
                ho = holdout(data, trainer, config.holdout_frac, config.seed, config.prep).report
            cells.append(Cell(model, f, cv, ho))
    return ExperimentReport(tuple(cells), config.as_dict())


def render_table(report: ExperimentReport) -> str:
    head = f"{'model':<6} {'features':<11} " + " ".join(f"{m:>17}" for m in METRICS)
    lines = ["Cross-validated detection performance (mean +/- std over folds)", head,
             "-" * len(head)]
    for c in report.cells:
        cells = " ".join(f"{c.cv.mean[m]:>8.4f} +/- {c.cv.std[m]:<5.3f}" for m in METRICS)
        lines.append(f"{c.model:<6} {FEATURE_LABELS[c.features]:<11} {cells}")
    ho = [c for c in report.cells if c.holdout is not None]
    if ho:
        lines += ["", "Held-out split", head, "-" * len(head)]
        for c in ho:
            cells = " ".join(f"{getattr(c.holdout, m):>17.4f}" for m in METRICS)
            lines.append(f"{c.model:<6} {FEATURE_LABELS[c.features]:<11} {cells}")
    models = [m for m in MODELS if any(c.model == m for c in report.cells)]
    gains = []
    for m in models:
        try:
            gains.append(f"{m} F1 gain with DT: {report.f1_gain(m):+.4f}")
        except KeyError:
            pass
    if gains:
        lines += [""] + gains
    lines += ["", "Reference values (published hardware-in-the-loop results, not expected to match):"]
    for (m, f), v in REFERENCE.items():
        if m in models:
            vals = " ".join(f"{v[k]:>17.4f}" for k in METRICS)
            lines.append(f"{m:<6} {FEATURE_LABELS[f]:<11} {vals}")
    return "\n".join(lines) + "\n"
