import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twingrid.errors import ShapeError
from twingrid.ml.metrics import ConfusionMatrix, CvReport, MetricsReport, confusion_matrix, evaluate

from oracles import metrics_closed_form


def _labels(tp, tn, fp, fn):
    y = np.array([1] * tp + [0] * tn + [0] * fp + [1] * fn)
    p = np.array([1] * tp + [0] * tn + [1] * fp + [0] * fn)
    return y, p


def test_reference_case():
    rep = evaluate(*_labels(50, 40, 10, 0))
    assert rep.matrix == ConfusionMatrix(50, 40, 10, 0)
    assert rep.accuracy == 0.9
    assert rep.precision == pytest.approx(0.8333333333333334, abs=1e-15)
    assert rep.recall == 1.0
    assert rep.f1 == pytest.approx(0.9090909090909091, abs=1e-15)


def test_symmetric_case():
    rep = MetricsReport.from_matrix(ConfusionMatrix(25, 25, 25, 25))
    assert (rep.accuracy, rep.precision, rep.recall, rep.f1) == (0.5, 0.5, 0.5, 0.5)


def test_all_negative_predictions_warn():
    y = np.array([1, 0, 1, 0])
    with pytest.warns(RuntimeWarning) as rec:
        rep = evaluate(y, np.zeros(4, int))
    assert any("precision" in str(w.message) for w in rec)
    assert rep.matrix.tp == rep.matrix.fp == 0
    assert rep.precision == 0.0 and rep.f1 == 0.0


def test_input_errors():
    with pytest.raises(ShapeError):
        confusion_matrix([0, 1], [0])
    with pytest.raises(ValueError):
        confusion_matrix([0, 2], [0, 1])


def test_matrix_layout():
    cm = ConfusionMatrix(1, 2, 3, 4)
    assert cm.as_array().tolist() == [[2, 3], [4, 1]]
    assert cm.total == 10


counts = st.integers(0, 1000)


@given(counts, counts, counts, counts)
def test_matches_closed_form(tp, tn, fp, fn):
    if tp + tn + fp + fn == 0:
        return
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = MetricsReport.from_matrix(ConfusionMatrix(tp, tn, fp, fn))
    ref = metrics_closed_form(tp, tn, fp, fn)
    got = (rep.accuracy, rep.precision, rep.recall, rep.f1)
    assert np.allclose(got, ref, atol=1e-12, rtol=0)
    assert rep.accuracy == (tp + tn) / (tp + tn + fp + fn)
    if tp + fp and tp + fn and tp:
        assert min(rep.precision, rep.recall) - 1e-15 <= rep.f1 <= max(rep.precision, rep.recall) + 1e-15


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=200))
def test_recompute_from_stored_matrix(pairs):
    y, p = map(np.array, zip(*pairs))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = evaluate(y, p)
        again = MetricsReport.from_matrix(rep.matrix)
    assert again.as_dict() == rep.as_dict()
    assert MetricsReport.from_dict(rep.as_dict()).as_dict() == rep.as_dict()


def test_cv_report_mean_std():
    folds = [MetricsReport.from_matrix(ConfusionMatrix(*c)) for c in [(5, 5, 0, 0), (4, 4, 1, 1)]]
    cv = CvReport.from_folds(folds)
    assert cv.k == 2
    assert cv.mean["accuracy"] == pytest.approx(0.9)
    assert cv.std["accuracy"] == pytest.approx(np.std([1.0, 0.8], ddof=1))
    assert CvReport.from_dict(cv.as_dict()).as_dict() == cv.as_dict()
    assert CvReport.from_folds(folds[:1]).std["f1"] == 0.0
