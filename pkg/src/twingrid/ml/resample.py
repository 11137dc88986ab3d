"""Class-imbalance handling, noise augmentation and stratified partitioning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..errors import ParameterError
from .data import LabeledDataset


@dataclass(frozen=True, eq=False)
class SmoteResult:
    """Oversampled dataset plus provenance of every synthetic row.

    ``pairs[i] = (a, b)`` indexes the minority rows (within the original
    dataset) interpolated to produce synthetic row ``i``, and ``gaps[i]`` is
    the interpolation weight.
    """

    dataset: LabeledDataset
    pairs: np.ndarray
    gaps: np.ndarray
    neighbors: np.ndarray   # (n_minority, k) k-NN table in original row indices


def _minority_class(y: np.ndarray) -> int:
    n1 = int(y.sum())
    return 1 if n1 <= len(y) - n1 else 0


def smote_detailed(data: LabeledDataset, k_neighbors: int = 5, target_ratio: float = 1.0,
                   rng: np.random.Generator | None = None, gap: float | None = None) -> SmoteResult:
    """SMOTE oversampling of the minority class.

    Synthetic rows are appended after the originals.  ``gap`` forces a fixed
    interpolation weight instead of drawing u ~ U[0, 1].
    """
    if k_neighbors < 1:
        raise ParameterError("k_neighbors must be at least 1")
    if not target_ratio > 0:
        raise ParameterError("target_ratio must be positive")
    if rng is None:
        rng = np.random.default_rng(0)
    cls = _minority_class(data.y)
    minority = np.flatnonzero(data.y == cls)
    n_min = len(minority)
    n_maj = len(data.y) - n_min
    if n_min <= k_neighbors:
        raise ParameterError(f"minority class has {n_min} samples, needs more than k_neighbors={k_neighbors}")
    n_new = max(0, int(round(target_ratio * n_maj)) - n_min)

    pts = data.X[minority]
    # query k+1 because every point is its own nearest neighbor
    _, nn = cKDTree(pts).query(pts, k=k_neighbors + 1)
    nn = np.asarray(nn).reshape(n_min, k_neighbors + 1)
    own = np.arange(n_min)[:, None]
    # drop self (duplicates may place self anywhere in the tie group)
    keep = np.empty((n_min, k_neighbors), dtype=np.int64)
    for i in range(n_min):
        row = nn[i][nn[i] != own[i, 0]]
        keep[i] = row[:k_neighbors] if len(row) >= k_neighbors else nn[i][1:]

    a = rng.integers(0, n_min, size=n_new)
    b = keep[a, rng.integers(0, k_neighbors, size=n_new)]
    u = np.full(n_new, float(gap)) if gap is not None else rng.uniform(0.0, 1.0, size=n_new)
    synth = pts[a] + u[:, None] * (pts[b] - pts[a])

    X = np.vstack([data.X, synth])
    y = np.concatenate([data.y, np.full(n_new, cls, dtype=np.int64)])
    out = LabeledDataset(X, y, data.feature_names)
    return SmoteResult(out, np.column_stack([minority[a], minority[b]]).reshape(n_new, 2), u,
                       minority[keep])


def smote(data: LabeledDataset, k_neighbors: int = 5, target_ratio: float = 1.0,
          rng: np.random.Generator | None = None, gap: float | None = None) -> LabeledDataset:
    return smote_detailed(data, k_neighbors, target_ratio, rng, gap).dataset


def gaussian_augment(data: LabeledDataset, sigma_frac: float,
                     rng: np.random.Generator | None = None) -> LabeledDataset:
    """Append one jittered copy of every row, noise scaled per feature."""
    if sigma_frac < 0:
        raise ParameterError("sigma_frac must be non-negative")
    if rng is None:
        rng = np.random.default_rng(0)
    sd = data.X.std(axis=0, ddof=1) if len(data) > 1 else np.zeros(data.n_features)
    noise = rng.standard_normal(data.X.shape) * (sigma_frac * sd)
    X = np.vstack([data.X, data.X + noise])
    return LabeledDataset(X, np.concatenate([data.y, data.y]), data.feature_names)


def stratified_split_indices(y: np.ndarray, test_frac: float,
                             rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < test_frac < 1.0:
        raise ParameterError(f"test_frac must lie in (0, 1), got {test_frac}")
    y = np.asarray(y)
    train, test = [], []
    for c in (0, 1):
        idx = np.flatnonzero(y == c)
        if len(idx) == 0:
            continue
        if len(idx) < 2:
            raise ParameterError(f"class {c} has fewer than 2 samples")
        idx = rng.permutation(idx)
        n_test = int(round(len(idx) * test_frac))
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    train = rng.permutation(np.concatenate(train))
    test = rng.permutation(np.concatenate(test))
    return train, test


def stratified_split(data: LabeledDataset, test_frac: float,
                     rng: np.random.Generator) -> tuple[LabeledDataset, LabeledDataset]:
    tr, te = stratified_split_indices(data.y, test_frac, rng)
    return data.subset(tr), data.subset(te)


def stratified_kfold_indices(y: np.ndarray, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Test-index arrays for k stratified folds.

    Each class is shuffled and dealt round-robin, so fold sizes per class
    differ by at most one.
    """
    if k < 2:
        raise ParameterError("k must be at least 2")
    y = np.asarray(y)
    folds: list[list[np.ndarray]] = [[] for _ in range(k)]
    offset = 0
    for c in (0, 1):
        idx = np.flatnonzero(y == c)
        if len(idx) < k:
            raise ParameterError(f"class {c} has {len(idx)} samples, fewer than k={k}")
        idx = rng.permutation(idx)
        for j in range(k):
            # rotate the starting fold so remainders spread across folds
            folds[(j + offset) % k].append(idx[j::k])
        offset += len(idx) % k
    return [np.sort(np.concatenate(f)) for f in folds]
