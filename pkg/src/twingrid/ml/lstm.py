"""Single-layer LSTM binary classifier in plain numpy (float64).

Gates are stacked as [input, forget, cell, output] along the first axis of
the weight matrices.  The final hidden state passes through dropout, a
dense layer and a sigmoid.  Training minimises binary cross-entropy with
Adam and decoupled weight decay, and stops early on validation loss.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import DivergenceError, ParameterError, ShapeError, TrainingError
from .data import LabeledDataset

PARAM_NAMES = ("W", "U", "b", "w_out", "b_out")
DECAYED = ("W", "U", "w_out")


@dataclass(frozen=True, eq=False)
class SequenceDataset:
    X: np.ndarray           # (n, W, d)
    y: np.ndarray
    feature_names: list[str]
    end_index: np.ndarray   # row index of each window's final step

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "SequenceDataset":
        return SequenceDataset(self.X[idx], self.y[idx], self.feature_names, self.end_index[idx])

    def flat(self) -> LabeledDataset:
        n, w, d = self.X.shape
        names = [f"{c}@{k}" for k in range(w) for c in self.feature_names]
        return LabeledDataset(self.X.reshape(n, w * d), self.y, names)


def make_sequences(data: LabeledDataset, window: int = 20, stride: int = 1) -> SequenceDataset:
    """Overlapping windows of consecutive rows, labelled by their last row."""
    if window < 1 or stride < 1:
        raise ParameterError("window and stride must be positive")
    n = len(data)
    if n < window:
        raise ShapeError(f"{n} rows cannot fill a window of {window}")
    ends = np.arange(window - 1, n, stride)
    offs = np.arange(-window + 1, 1)
    X = data.X[ends[:, None] + offs[None, :]]
    return SequenceDataset(X, data.y[ends].copy(), list(data.feature_names), ends)


@dataclass(frozen=True)
class LstmConfig:
    hidden: int = 32
    lr: float = 1e-3
    epochs: int = 50
    batch_size: int = 128
    dropout: float = 0.2
    weight_decay: float = 1e-4
    patience: int = 10
    val_frac: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    strict_ranges: bool = True

    def __post_init__(self):
        if self.strict_ranges:
            if self.hidden not in (32, 64):
                raise ParameterError(f"hidden must be 32 or 64, got {self.hidden}")
            if not 1e-4 <= self.lr <= 1e-3:
                raise ParameterError(f"lr must lie in [1e-4, 1e-3], got {self.lr}")
            if not 50 <= self.epochs <= 150:
                raise ParameterError(f"epochs must lie in [50, 150], got {self.epochs}")
        if self.hidden < 1 or self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ParameterError("hidden, epochs, batch_size and patience must be positive")
        if not self.lr > 0:
            raise ParameterError("lr must be positive")
        if not 0 <= self.dropout < 1:
            raise ParameterError("dropout must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ParameterError("weight_decay must be non-negative")
        if not 0 <= self.val_frac < 1:
            raise ParameterError("val_frac must lie in [0, 1)")


@dataclass(eq=False)
class LstmModel:
    params: dict
    config: LstmConfig
    seed: int
    n_features: int
    history: dict | None = None

    @property
    def hidden(self) -> int:
        return self.params["U"].shape[1]

    def to_dict(self) -> dict:
        return {"kind": "lstm", "config": asdict(self.config), "seed": self.seed,
                "n_features": self.n_features,
                "params": {k: np.asarray(v).tolist() for k, v in self.params.items()},
                "history": self.history}

    @classmethod
    def from_dict(cls, d) -> "LstmModel":
        params = {k: np.asarray(v, dtype=np.float64) for k, v in d["params"].items()}
        return cls(params, LstmConfig(**d["config"]), int(d["seed"]), int(d["n_features"]),
                   d.get("history"))


def init_params(d: int, hidden: int, rng: np.random.Generator) -> dict:
    s = 1.0 / np.sqrt(hidden)
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0      # forget gate
    return {
        "W": rng.uniform(-s, s, size=(4 * hidden, d)),
        "U": rng.uniform(-s, s, size=(4 * hidden, hidden)),
        "b": b,
        "w_out": rng.uniform(-s, s, size=hidden),
        "b_out": np.zeros(1),
    }


def zero_params(d: int, hidden: int) -> dict:
    return {"W": np.zeros((4 * hidden, d)), "U": np.zeros((4 * hidden, hidden)),
            "b": np.zeros(4 * hidden), "w_out": np.zeros(hidden), "b_out": np.zeros(1)}


def _sigmoid(x):
    # tanh form never overflows
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def _forward(params, X, mask=None):
    """Return logits and the cache needed for backprop."""
    B, T, _ = X.shape
    H = params["U"].shape[1]
    W, U, b = params["W"], params["U"], params["b"]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    XW = X @ W.T + b            # (B, T, 4H)
    cache = []
    for t in range(T):
        z = XW[:, t] + h @ U.T
        sz = _sigmoid(z)
        i = sz[:, :H]
        f = sz[:, H:2 * H]
        o = sz[:, 3 * H:]
        g = np.tanh(z[:, 2 * H:3 * H])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        cache.append((i, f, g, o, c_prev, h_prev, tc))
    hd = h if mask is None else h * mask
    logits = hd @ params["w_out"] + params["b_out"][0]
    return logits, (cache, h, hd)


def _bce(logits, y):
    # softplus(z) - y z, computed without overflow
    return float(np.mean(np.maximum(logits, 0) - logits * y + np.log1p(np.exp(-np.abs(logits)))))


def loss_and_grads(params: dict, X: np.ndarray, y: np.ndarray,
                   mask: np.ndarray | None = None) -> tuple[float, dict]:
    """Mean BCE over the batch and its gradient for every parameter."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    B, T, _ = X.shape
    H = params["U"].shape[1]
    logits, (cache, h_last, hd) = _forward(params, X, mask)
    loss = _bce(logits, y)

    dlogit = (_sigmoid(logits) - y) / B
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    grads["w_out"] = hd.T @ dlogit
    grads["b_out"] = np.array([dlogit.sum()])
    dh = np.outer(dlogit, params["w_out"])
    if mask is not None:
        dh = dh * mask
    dc = np.zeros((B, H))
    U = params["U"]
    dZ = np.empty((B, T, 4 * H))
    for t in range(T - 1, -1, -1):
        i, f, g, o, c_prev, h_prev, tc = cache[t]
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dz = dZ[:, t]
        dz[:, :H] = di * i * (1.0 - i)
        dz[:, H:2 * H] = df * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dg * (1.0 - g * g)
        dz[:, 3 * H:] = do * o * (1.0 - o)
        grads["U"] += dz.T @ h_prev
        dh = dz @ U
        dc = dc * f
    grads["W"] = dZ.reshape(B * T, 4 * H).T @ X.reshape(B * T, -1)
    grads["b"] = dZ.sum(axis=(0, 1))
    return loss, grads


def predict_logits(params: dict, X: np.ndarray, batch: int = 4096) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(len(X))
    for s in range(0, len(X), batch):
        out[s:s + batch] = _forward(params, X[s:s + batch])[0]
    return out


def lstm_predict(model: LstmModel, seqs) -> np.ndarray:
    """Class-1 probabilities for a SequenceDataset or an (n, W, d) array."""
    X = seqs.X if isinstance(seqs, SequenceDataset) else np.asarray(seqs, dtype=np.float64)
    if X.ndim != 3 or X.shape[2] != model.n_features:
        raise ShapeError(f"model expects (n, W, {model.n_features}) input, got {X.shape}")
    return _sigmoid(predict_logits(model.params, X))


def lstm_classify(model: LstmModel, seqs, threshold: float = 0.5) -> np.ndarray:
    return (lstm_predict(model, seqs) >= threshold).astype(np.int64)


class _Adam:
    def __init__(self, params, cfg: LstmConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        for k in params:
            g = grads[k]
            self.m[k] = c.beta1 * self.m[k] + (1 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1 - c.beta2) * g * g
            update = (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + c.eps)
            if k in DECAYED:
                update = update + c.weight_decay * params[k]
            params[k] -= c.lr * update


def _val_split(y, frac, rng):
    if frac == 0:
        return np.arange(len(y)), np.arange(0)
    val = []
    for c in (0, 1):
        idx = rng.permutation(np.flatnonzero(y == c))
        val.append(idx[:int(round(len(idx) * frac))])
    val = np.sort(np.concatenate(val))
    train = np.setdiff1d(np.arange(len(y)), val)
    return train, val


def lstm_train(seqs, config: LstmConfig = LstmConfig(), seed: int = 0,
               val: SequenceDataset | None = None, init: dict | None = None) -> LstmModel:
    """Fit on ``seqs`` (SequenceDataset or (X, y) pair).

    Without an explicit ``val`` set, a stratified ``val_frac`` slice of the
    training sequences drives early stopping.
    """
    if isinstance(seqs, SequenceDataset):
        X, y = seqs.X, seqs.y
    else:
        X, y = seqs
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 3 or len(X) != len(y):
        raise ShapeError(f"expected (n, W, d) sequences with n labels, got {X.shape} / {y.shape}")
    if y.min() == y.max():
        raise TrainingError("training sequences must contain both classes")
    rng = np.random.default_rng(seed)
    if val is None:
        tr, va = _val_split(y, config.val_frac, rng)
        Xv, yv = X[va], y[va]
        X, y = X[tr], y[tr]
    else:
        Xv, yv = val.X, val.y
    d = X.shape[2]
    H = config.hidden
    params = init_params(d, H, rng) if init is None else {k: v.copy() for k, v in init.items()}
    opt = _Adam(params, config)
    keep = 1.0 - config.dropout
    best = (np.inf, {k: v.copy() for k, v in params.items()}, 0)
    history = {"train_loss": [], "val_loss": []}
    wait = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(X))
        total = 0.0
        for bi, s in enumerate(range(0, len(X), config.batch_size)):
            idx = order[s:s + config.batch_size]
            mask = None
            if config.dropout > 0:
                mask = (rng.random((len(idx), H)) < keep) / keep
            loss, grads = loss_and_grads(params, X[idx], y[idx], mask)
            if not np.isfinite(loss):
                raise DivergenceError("training loss became non-finite", epoch=epoch, batch=bi)
            opt.step(params, grads)
            total += loss * len(idx)
        train_loss = total / len(X)
        history["train_loss"].append(train_loss)
        if len(Xv):
            val_loss = _bce(predict_logits(params, Xv), yv.astype(float))
            if not np.isfinite(val_loss):
                raise DivergenceError("validation loss became non-finite", epoch=epoch, batch=None)
        else:
            val_loss = train_loss
        history["val_loss"].append(val_loss)
        if val_loss < best[0]:
            best = (val_loss, {k: v.copy() for k, v in params.items()}, epoch)
            wait = 0
        else:
            wait += 1
            if wait >= config.patience:
                break
    history["best_epoch"] = best[2]
    return LstmModel(best[1], config, int(seed), d, history)
