"""Random Forest with exact Gini splits, compiled with numba.

Each tree grows on a bootstrap sample.  At every node a random subset of
features is scanned; thresholds are midpoints between consecutive distinct
values and ``x <= threshold`` routes left.  Ties in split quality go to the
lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numba as nb
import numpy as np

from ..errors import ParameterError, ShapeError, TrainingError
from .data import LabeledDataset

_LEAF = -1
_TIE_EPS = 1e-12


@dataclass(frozen=True)
class ForestHyper:
    n_estimators: int = 100
    max_depth: int = 10
    min_samples_split: int = 10
    min_samples_leaf: int = 5
    features_per_split: int | str = "sqrt"
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ParameterError("n_estimators must be at least 1")
        if self.max_depth < 0:
            raise ParameterError("max_depth must be non-negative")
        if self.min_samples_split < 2:
            raise ParameterError("min_samples_split must be at least 2")
        if self.min_samples_leaf < 1:
            raise ParameterError("min_samples_leaf must be at least 1")
        if isinstance(self.features_per_split, str):
            if self.features_per_split not in ("sqrt", "all"):
                raise ParameterError("features_per_split must be an int, 'sqrt' or 'all'")
        elif self.features_per_split < 1:
            raise ParameterError("features_per_split must be at least 1")

    def mtry(self, d: int) -> int:
        if self.features_per_split == "sqrt":
            return max(1, int(math.isqrt(d)))
        if self.features_per_split == "all":
            return d
        return min(d, int(self.features_per_split))


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray     # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray       # class-1 probability
    n_node: np.ndarray
    depth: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist(), "n_node": self.n_node.tolist(), "depth": self.depth}

    @classmethod
    def from_dict(cls, d) -> "Tree":
        return cls(np.asarray(d["feature"], np.int64), np.asarray(d["threshold"], np.float64),
                   np.asarray(d["left"], np.int64), np.asarray(d["right"], np.int64),
                   np.asarray(d["value"], np.float64), np.asarray(d["n_node"], np.int64),
                   int(d["depth"]))

    def leaf_sizes(self) -> np.ndarray:
        return self.n_node[self.feature == _LEAF]


@dataclass(frozen=True, eq=False)
class RandomForestModel:
    trees: tuple[Tree, ...]
    hyper: ForestHyper
    seed: int
    n_features: int
    importances: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_dict(self) -> dict:
        return {"kind": "random_forest", "hyper": asdict(self.hyper), "seed": self.seed,
                "n_features": self.n_features, "importances": self.importances.tolist(),
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d) -> "RandomForestModel":
        return cls(tuple(Tree.from_dict(t) for t in d["trees"]), ForestHyper(**d["hyper"]),
                   int(d["seed"]), int(d["n_features"]), np.asarray(d["importances"], np.float64))


# ---------------------------------------------------------------------------
# compiled kernels

@nb.njit(cache=True)
def _splitmix(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15))
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def _gini(n1, n):
    if n == 0:
        return 0.0
    p = n1 / n
    return 2.0 * p * (1.0 - p)


@nb.njit(cache=True, nogil=True)
def _grow(X, y, gorder, w, max_depth, min_split, min_leaf, mtry, rng_state):
    """Grow one tree on the rows of ``X`` weighted by bootstrap counts ``w``.

    ``gorder[f]`` is the stable argsort of feature f over all rows.  Each
    feature keeps its own ordering of the node's rows; splitting a node
    stably partitions every ordering, so nothing is re-sorted.  An integer
    weight behaves exactly like that many duplicated rows.
    """
    d = X.shape[1]
    n_rows = X.shape[0]
    n_total = 0
    n_used = 0
    for i in range(n_rows):
        n_total += w[i]
        if w[i] > 0:
            n_used += 1
    cap = 2 * n_used + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    n_node = np.zeros(cap, np.int64)
    importance = np.zeros(d)

    order = np.empty((d, n_used), np.int64)
    for f in range(d):
        k = 0
        for i in range(n_rows):
            r = gorder[f, i]
            if w[r] > 0:
                order[f, k] = r
                k += 1

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n_used
    st_depth[0] = 0
    top = 1
    n_nodes = 1
    max_seen = 0
    feats = np.arange(d)
    cand = np.empty(mtry, np.int64)
    goes_left = np.zeros(n_rows, np.bool_)
    buf = np.empty(n_used, np.int64)
    state = rng_state

    while top > 0:
        top -= 1
        node = st_node[top]
        s = st_start[top]
        e = st_end[top]
        depth = st_depth[top]
        if depth > max_seen:
            max_seen = depth
        n = 0
        n1 = 0
        for i in range(s, e):
            r = order[0, i]
            n += w[r]
            n1 += w[r] * y[r]
        n_node[node] = n
        value[node] = n1 / n
        if depth >= max_depth or n < min_split or n1 == 0 or n1 == n or n < 2 * min_leaf:
            continue

        # partial Fisher-Yates draw of mtry features, scanned in index order
        for j in range(d):
            feats[j] = j
        for j in range(mtry):
            state, r = _splitmix(state)
            k = j + np.int64(r % np.uint64(d - j))
            tmp = feats[j]
            feats[j] = feats[k]
            feats[k] = tmp
        for j in range(mtry):
            cand[j] = feats[j]
        cand.sort()

        parent = _gini(n1, n)
        best_gain = -1.0
        best_f = -1
        best_t = 0.0
        for jj in range(mtry):
            f = cand[jj]
            of = order[f]
            l1 = 0
            nl = 0
            for i in range(s, e - 1):
                r = of[i]
                l1 += w[r] * y[r]
                nl += w[r]
                if nl < min_leaf:
                    continue
                if n - nl < min_leaf:
                    break
                a = X[r, f]
                b = X[of[i + 1], f]
                if a == b:
                    continue
                gain = parent - (nl * _gini(l1, nl) + (n - nl) * _gini(n1 - l1, n - nl)) / n
                if gain > best_gain + _TIE_EPS:
                    t = 0.5 * (a + b)
                    if t >= b:
                        t = a
                    best_gain = gain
                    best_f = f
                    best_t = t
        if best_f < 0:
            continue

        m = 0
        for i in range(s, e):
            p = order[0, i]
            goes_left[p] = X[p, best_f] <= best_t
            if goes_left[p]:
                m += 1
        mid = s + m
        for f in range(d):
            of = order[f]
            li = s
            ri = 0
            for i in range(s, e):
                p = of[i]
                if goes_left[p]:
                    of[li] = p
                    li += 1
                else:
                    buf[ri] = p
                    ri += 1
            for i in range(ri):
                of[mid + i] = buf[i]

        feature[node] = best_f
        threshold[node] = best_t
        importance[best_f] += n / n_total * best_gain
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        # push right first so the left subtree is numbered first
        st_node[top] = rnode
        st_start[top] = mid
        st_end[top] = e
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lnode
        st_start[top] = s
        st_end[top] = mid
        st_depth[top] = depth + 1
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), n_node[:n_nodes].copy(),
            max_seen, importance)


@nb.njit(cache=True, nogil=True)
def _tree_proba(feature, threshold, left, right, value, X, out):
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] += value[node]


@nb.njit(cache=True, nogil=True)
def _tree_leaves(feature, threshold, left, right, X, out):
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node


# ---------------------------------------------------------------------------

def n_threads() -> int:
    """Worker cap from TWINGRID_THREADS (default 1)."""
    raw = os.environ.get("TWINGRID_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ParameterError(f"TWINGRID_THREADS must be an integer, got {raw!r}") from None


def tree_seed(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng((int(seed), int(index)))


def _fit_tree(X, y, gorder, hyper: ForestHyper, seed: int, index: int, mtry: int):
    rng = tree_seed(seed, index)
    n = len(y)
    if hyper.bootstrap:
        w = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.int64)
    else:
        w = np.ones(n, np.int64)
    state = np.uint64(rng.integers(0, 2**63 - 1))
    f, t, lft, rgt, v, nn, depth, imp = _grow(X, y, gorder, w, hyper.max_depth,
                                              hyper.min_samples_split, hyper.min_samples_leaf,
                                              mtry, state)
    return Tree(f, t, lft, rgt, v, nn, int(depth)), imp


def _check_xy(X, y):
    if X.ndim != 2 or len(X) != len(y):
        raise ShapeError(f"X {X.shape} and y {y.shape} do not align")
    n1 = int(y.sum())
    if n1 == 0 or n1 == len(y):
        raise TrainingError("training data must contain both classes")


def rf_fit(X: np.ndarray, y: np.ndarray, hyper: ForestHyper = ForestHyper(), seed: int = 0,
           threads: int | None = None) -> RandomForestModel:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    _check_xy(X, y)
    mtry = hyper.mtry(X.shape[1])
    threads = n_threads() if threads is None else threads
    gorder = np.ascontiguousarray(np.argsort(X.T, axis=1, kind="stable"))
    jobs = range(hyper.n_estimators)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            fitted = list(ex.map(lambda i: _fit_tree(X, y, gorder, hyper, seed, i, mtry), jobs))
    else:
        fitted = [_fit_tree(X, y, gorder, hyper, seed, i, mtry) for i in jobs]
    trees = tuple(t for t, _ in fitted)
    imp = np.mean([i for _, i in fitted], axis=0)
    total = imp.sum()
    imp = imp / total if total > 0 else np.full(X.shape[1], 1.0 / X.shape[1])
    return RandomForestModel(trees, hyper, int(seed), X.shape[1], imp)


def rf_train(train: LabeledDataset, hyper: ForestHyper = ForestHyper(), seed: int = 0,
             threads: int | None = None) -> RandomForestModel:
    return rf_fit(train.X, train.y, hyper, seed, threads)


def rf_predict_proba(model: RandomForestModel, X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeError(f"model expects {model.n_features} features, got shape {X.shape}")
    acc = np.zeros(len(X))
    for t in model.trees:
        _tree_proba(t.feature, t.threshold, t.left, t.right, t.value, X, acc)
    return acc / len(model.trees)


def rf_predict(model: RandomForestModel, X: np.ndarray,
               threshold: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Labels (probability >= threshold) and class-1 probabilities."""
    proba = rf_predict_proba(model, X)
    return (proba >= threshold).astype(np.int64), proba


def rf_apply(model: RandomForestModel, X: np.ndarray) -> np.ndarray:
    """Leaf index reached in every tree, shape (n_samples, n_trees)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    out = np.empty((len(model.trees), len(X)), np.int64)
    for k, t in enumerate(model.trees):
        _tree_leaves(t.feature, t.threshold, t.left, t.right, X, out[k])
    return out.T


def gini_importance(data: LabeledDataset, hyper: ForestHyper = ForestHyper(),
                    seed: int = 0) -> list[tuple[str, float]]:
    """Mean decrease in impurity, normalized to sum 1, ranked high to low."""
    model = rf_train(data, hyper, seed)
    order = sorted(range(data.n_features), key=lambda j: (-model.importances[j], j))
    return [(data.feature_names[j], float(model.importances[j])) for j in order]


def select_features(ranked: list[tuple[str, float]], cutoff: float = 0.99) -> list[str]:
    """Smallest top-ranked set whose cumulative importance reaches ``cutoff``."""
    if not 0 < cutoff <= 1:
        raise ParameterError("cutoff must lie in (0, 1]")
    kept, total = [], 0.0
    for name, score in ranked:
        kept.append(name)
        total += score
        if total >= cutoff - 1e-12:
            break
    return kept
