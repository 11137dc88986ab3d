"""Stratified k-fold cross-validation and held-out evaluation.

Scaling and resampling are fitted on the training part of every split.
``paper_order=True`` instead augments and oversamples the whole sample set
before splitting, which lets synthetic neighbours leak across folds; it is
kept only for comparison.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ParameterError, SchemaError
from .data import LabeledDataset, ScalerParams, apply_zscore, zscore
from .forest import ForestHyper, RandomForestModel, rf_predict, rf_train
from .lstm import LstmConfig, LstmModel, SequenceDataset, lstm_predict, lstm_train, make_sequences
from .metrics import CvReport, MetricsReport, evaluate
from .resample import gaussian_augment, smote, stratified_kfold_indices, stratified_split_indices

ARTIFACT_VERSION = 1


@dataclass(frozen=True)
class PrepConfig:
    scale: bool = True
    smote: bool = True
    k_neighbors: int = 5
    target_ratio: float = 1.0
    augment_sigma: float = 0.0      # 0 disables the Gaussian copy
    paper_order: bool = False


def derive_seed(seed: int, *path: int) -> int:
    return int(np.random.default_rng((int(seed), *path)).integers(0, 2**31 - 1))


# -- sample containers -------------------------------------------------------
# RF works on rows (LabeledDataset); LSTM on windows (SequenceDataset).  Both
# are flattened to 2-D for resampling and reshaped afterwards.

def _rows2d(s) -> np.ndarray:
    return s.X.reshape(-1, s.X.shape[-1])


def _flat(s) -> LabeledDataset:
    return s.flat() if isinstance(s, SequenceDataset) else LabeledDataset(s.X, s.y, s.feature_names)


def _unflat(flat: LabeledDataset, like):
    if isinstance(like, SequenceDataset):
        _, w, d = like.X.shape
        X = flat.X.reshape(len(flat), w, d)
        return SequenceDataset(X, flat.y, like.feature_names, np.full(len(flat), -1, np.int64))
    return LabeledDataset(flat.X, flat.y, like.feature_names)


def _with_X(s, X):
    if isinstance(s, SequenceDataset):
        return SequenceDataset(X, s.y, s.feature_names, s.end_index)
    return LabeledDataset(X, s.y, s.feature_names, s.t_ms)


def _resample(s, prep: PrepConfig, rng: np.random.Generator):
    if not (prep.smote or prep.augment_sigma > 0):
        return s
    flat = _flat(s)
    if prep.augment_sigma > 0:
        flat = gaussian_augment(flat, prep.augment_sigma, rng)
    if prep.smote:
        flat = smote(flat, prep.k_neighbors, prep.target_ratio, rng)
    return _unflat(flat, s)


def _scale(train, tests, prep: PrepConfig):
    if not prep.scale:
        return train, tests, None
    params = zscore(_rows2d(train))
    return (_with_X(train, apply_zscore(params, train.X)),
            [_with_X(t, apply_zscore(params, t.X)) for t in tests], params)


def prepare(train, test, prep: PrepConfig, rng: np.random.Generator):
    """Fit scaler and resampling on ``train`` only; return (train', test', scaler)."""
    train, (test,), params = _scale(train, [test], prep)
    return _resample(train, prep, rng), test, params


# -- trainers ------------------------------------------------------------------

@dataclass(frozen=True)
class RandomForestTrainer:
    hyper: ForestHyper = ForestHyper()
    threshold: float = 0.5
    name: str = "RF"

    def samples(self, data: LabeledDataset):
        return data

    def fit(self, train: LabeledDataset, seed: int) -> RandomForestModel:
        return rf_train(train, self.hyper, seed)

    def predict(self, model, test) -> np.ndarray:
        return rf_predict(model, test.X, self.threshold)[0]

    def describe(self) -> dict:
        return {"model": "random_forest", "hyper": asdict(self.hyper), "threshold": self.threshold}


@dataclass(frozen=True)
class LstmTrainer:
    config: LstmConfig = LstmConfig()
    window: int = 20
    stride: int = 1
    threshold: float = 0.5
    name: str = "LSTM"

    def samples(self, data: LabeledDataset) -> SequenceDataset:
        return make_sequences(data, self.window, self.stride)

    def fit(self, train: SequenceDataset, seed: int) -> LstmModel:
        return lstm_train(train, self.config, seed)

    def predict(self, model, test) -> np.ndarray:
        return (lstm_predict(model, test) >= self.threshold).astype(np.int64)

    def describe(self) -> dict:
        return {"model": "lstm", "config": asdict(self.config), "window": self.window,
                "stride": self.stride, "threshold": self.threshold}


# -- evaluation ----------------------------------------------------------------

@dataclass(eq=False)
class FoldResult:
    report: MetricsReport
    test_index: np.ndarray
    model: object = None


def kfold_cv(data: LabeledDataset, k: int, trainer, seed: int = 0,
             prep: PrepConfig = PrepConfig(), keep_models: bool = False) -> CvReport:
    return kfold_cv_detailed(data, k, trainer, seed, prep, keep_models)[0]


def kfold_cv_detailed(data: LabeledDataset, k: int, trainer, seed: int = 0,
                      prep: PrepConfig = PrepConfig(),
                      keep_models: bool = False) -> tuple[CvReport, list[FoldResult]]:
    samples = trainer.samples(data)
    if prep.paper_order:
        samples = _resample(samples, prep, np.random.default_rng((seed, 0xA06)))
    folds = stratified_kfold_indices(samples.y, k, np.random.default_rng((seed, 0xF01D)))
    n = len(samples.y)
    results = []
    for j, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(np.arange(n), test_idx)
        tr, te = samples.subset(train_idx), samples.subset(test_idx)
        rng = np.random.default_rng((seed, j))
        if prep.paper_order:
            tr, (te,), _ = _scale(tr, [te], prep)
        else:
            tr, te, _ = prepare(tr, te, prep, rng)
        model = trainer.fit(tr, derive_seed(seed, j))
        rep = evaluate(te.y, trainer.predict(model, te))
        results.append(FoldResult(rep, test_idx, model if keep_models else None))
    return CvReport.from_folds(r.report for r in results), results


@dataclass(eq=False)
class HoldoutResult:
    report: MetricsReport
    model: object
    scaler: ScalerParams | None
    feature_names: list[str]
    seed: int


def holdout(data: LabeledDataset, trainer, test_frac: float = 0.2, seed: int = 0,
            prep: PrepConfig = PrepConfig()) -> HoldoutResult:
    samples = trainer.samples(data)
    rng = np.random.default_rng((seed, 0x401D))
    if prep.paper_order:
        samples = _resample(samples, prep, rng)
    tr_idx, te_idx = stratified_split_indices(samples.y, test_frac, rng)
    tr, te = samples.subset(tr_idx), samples.subset(te_idx)
    if prep.paper_order:
        tr, (te,), scaler = _scale(tr, [te], prep)
    else:
        tr, te, scaler = prepare(tr, te, prep, rng)
    model_seed = derive_seed(seed, 0x401D)
    model = trainer.fit(tr, model_seed)
    rep = evaluate(te.y, trainer.predict(model, te))
    return HoldoutResult(rep, model, scaler, list(data.feature_names), model_seed)


# -- artifacts -------------------------------------------------------------------

def artifact_dict(result: HoldoutResult, trainer, prep: PrepConfig) -> dict:
    return {
        "format": "twingrid-model",
        "version": ARTIFACT_VERSION,
        "trainer": trainer.describe(),
        "prep": asdict(prep),
        "seed": result.seed,
        "feature_names": list(result.feature_names),
        "scaler": None if result.scaler is None else result.scaler.to_dict(),
        "model": result.model.to_dict(),
        "holdout": result.report.as_dict(),
    }


def save_artifact(path, result: HoldoutResult, trainer, prep: PrepConfig = PrepConfig()) -> None:
    text = json.dumps(artifact_dict(result, trainer, prep), indent=1, sort_keys=True)
    try:
        Path(path).write_text(text + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


@dataclass(eq=False)
class Artifact:
    model: object
    scaler: ScalerParams | None
    feature_names: list[str]
    seed: int
    trainer: dict
    prep: PrepConfig
    holdout: MetricsReport | None = field(default=None)


def load_artifact(path) -> Artifact:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if d.get("format") != "twingrid-model":
        raise SchemaError(f"{path}: not a twingrid model artifact")
    m = d["model"]
    if m.get("kind") == "random_forest":
        model = RandomForestModel.from_dict(m)
    elif m.get("kind") == "lstm":
        model = LstmModel.from_dict(m)
    else:
        raise SchemaError(f"{path}: unknown model kind {m.get('kind')!r}")
    scaler = None if d["scaler"] is None else ScalerParams.from_dict(d["scaler"])
    ho = MetricsReport.from_dict(d["holdout"]) if d.get("holdout") else None
    return Artifact(model, scaler, list(d["feature_names"]), int(d["seed"]), d["trainer"],
                    PrepConfig(**d["prep"]), ho)


def check_k(k: int) -> int:
    if k < 2:
        raise ParameterError("folds must be at least 2")
    return k
