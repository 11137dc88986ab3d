import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twingrid.errors import ParameterError
from twingrid.ml.data import LabeledDataset
from twingrid.ml.resample import (gaussian_augment, smote, smote_detailed, stratified_kfold_indices,
                                  stratified_split, stratified_split_indices)

from oracles import knn_brute, smote_member


def _ds(X, y):
    X = np.asarray(X, float)
    return LabeledDataset(X, y, [f"x{j}" for j in range(X.shape[1])])


def test_interpolation_example():
    ds = _ds([[0, 0], [1, 1], [5, 5], [6, 6], [7, 7]], [1, 1, 0, 0, 0])
    out = smote(ds, k_neighbors=1, target_ratio=1.0, gap=0.5)
    assert len(out) == 6  # 3 majority, 2 minority, 1 synthetic
    assert out.X[-1].tolist() == [0.5, 0.5] and out.y[-1] == 1


def test_balances_80_20(rng):
    ds = _ds(rng.normal(size=(100, 3)), [0] * 80 + [1] * 20)
    out = smote(ds, rng=rng)
    assert out.class_counts() == (80, 80)
    assert np.array_equal(out.X[:100], ds.X)


@settings(max_examples=30)
@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(6, 25))
def test_synthetic_points_are_neighbor_interpolations(seed, k, n_min):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(size=(n_min, 2)), rng.normal(3, 1, size=(60, 2))])
    y = np.array([1] * n_min + [0] * 60)
    res = smote_detailed(_ds(X, y), k_neighbors=k, rng=rng)
    P = X[:n_min]
    nbrs = knn_brute(P, k)
    synth = res.dataset.X[len(X):]
    assert len(synth) == 60 - n_min
    lo, hi = P.min(axis=0), P.max(axis=0)
    for s in synth:
        assert np.all(s >= lo - 1e-12) and np.all(s <= hi + 1e-12)
        assert smote_member(s, P, nbrs)


def test_smote_errors(rng):
    ds = _ds(rng.normal(size=(10, 2)), [0] * 7 + [1] * 3)
    with pytest.raises(ParameterError):
        smote(ds, k_neighbors=3)
    with pytest.raises(ParameterError):
        smote(ds, k_neighbors=0)


def test_gaussian_augment():
    X = np.arange(20.0).reshape(10, 2)
    ds = _ds(X, [0, 1] * 5)
    same = gaussian_augment(ds, 0.0, np.random.default_rng(0))
    assert len(same) == 20 and np.array_equal(same.X[10:], X)
    a = gaussian_augment(ds, 0.1, np.random.default_rng(3))
    b = gaussian_augment(ds, 0.1, np.random.default_rng(3))
    assert np.array_equal(a.X, b.X)
    assert np.array_equal(a.y[10:], ds.y)


def test_split_example(rng):
    ds = _ds(rng.normal(size=(100, 2)), [0] * 80 + [1] * 20)
    train, test = stratified_split(ds, 0.25, rng)
    assert test.class_counts() == (20, 5)
    assert train.class_counts() == (60, 15)


@given(st.integers(2, 60), st.integers(2, 60), st.floats(0.05, 0.95), st.integers(0, 1000))
def test_split_partitions(n0, n1, frac, seed):
    y = np.array([0] * n0 + [1] * n1)
    tr, te = stratified_split_indices(y, frac, np.random.default_rng(seed))
    assert np.array_equal(np.sort(np.concatenate([tr, te])), np.arange(n0 + n1))
    for c, n in ((0, n0), (1, n1)):
        assert abs((y[tr] == c).sum() - n * (1 - frac)) <= 1


def test_split_errors():
    with pytest.raises(ParameterError):
        stratified_split_indices(np.array([0, 0, 1, 1]), 1.0, np.random.default_rng())
    with pytest.raises(ParameterError):
        stratified_split_indices(np.array([0, 0, 1]), 0.5, np.random.default_rng())


def test_kfold_exact_stratification(rng):
    y = np.array([0, 1] * 50)
    folds = stratified_kfold_indices(y, 10, rng)
    assert len(folds) == 10
    for f in folds:
        assert (y[f] == 0).sum() == 5 and (y[f] == 1).sum() == 5
    assert np.array_equal(np.sort(np.concatenate(folds)), np.arange(100))


@given(st.integers(10, 80), st.integers(10, 80), st.integers(2, 10), st.integers(0, 99))
def test_kfold_balanced_within_one(n0, n1, k, seed):
    y = np.array([0] * n0 + [1] * n1)
    folds = stratified_kfold_indices(y, k, np.random.default_rng(seed))
    for c, n in ((0, n0), (1, n1)):
        sizes = [(y[f] == c).sum() for f in folds]
        assert max(sizes) - min(sizes) <= 1 and sum(sizes) == n
    with pytest.raises(ParameterError):
        stratified_kfold_indices(y, 1, np.random.default_rng(seed))
