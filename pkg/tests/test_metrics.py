import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hqcc.harness import aggregate
from hqcc.metrics import (
    EvalRecord, accuracy, append_log, auc_binary, confusion_matrix, evaluate_record, format_pm,
    mean_std, recall_f1, recall_f1_from_confusion,
)


def record(true, pred, k):
    scores = np.full((len(pred), k), 0.0)
    scores[np.arange(len(pred)), pred] = 1.0
    return EvalRecord(scores, true)


def record_from_confusion(cm):
    true, pred = [], []
    for i, row in enumerate(cm):
        for j, n in enumerate(row):
            true += [i] * n
            pred += [j] * n
    return record(true, pred, len(cm))


def brute_auc(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return wins / (len(pos) * len(neg))


def test_accuracy_examples():
    assert accuracy(record([0, 1, 1], [0, 1, 1], 2)) == 100.0
    assert accuracy(record([0, 1], [1, 0], 2)) == 0.0
    assert accuracy(record([0, 1, 2, 2], [0, 1, 2, 0], 3)) == 75.0
    with pytest.raises(ValueError):
        accuracy(record([], [], 2))


def test_argmax_ties_go_to_lowest_class():
    r = EvalRecord([[0.5, 0.5], [0.5, 0.5]], [0, 1])
    assert r.predictions.tolist() == [0, 0]
    assert accuracy(r) == 50.0


def test_record_validation():
    with pytest.raises(ValueError):
        EvalRecord([[0.6, 0.6]], [0])
    with pytest.raises(ValueError):
        EvalRecord([[1.2, -0.2]], [0])
    with pytest.raises(ValueError):
        EvalRecord([[1.0, 0.0]], [0, 1])


def test_confusion_examples():
    cm = confusion_matrix(record([0, 1, 2], [0, 1, 2], 3), 3)
    np.testing.assert_array_equal(cm, np.eye(3))
    cm = confusion_matrix(record([1], [0], 2), 2)
    assert cm[1, 0] == 1 and cm.sum() == 1
    r = record([0, 0, 1, 2, 2, 2], [1, 0, 1, 0, 2, 2], 3)
    assert confusion_matrix(r, 3).sum(axis=1).tolist() == [2, 1, 3]
    with pytest.raises(ValueError):
        confusion_matrix(record([3], [0], 4), 3)


def test_recall_f1_hand_cases():
    assert recall_f1(record([0, 1, 1], [0, 1, 1], 2), 2) == (1.0, 1.0)
    r = record_from_confusion([[50, 0], [10, 40]])
    rec, f1 = recall_f1(r, 2)
    assert rec == pytest.approx(0.9, abs=1e-12)
    assert f1 == pytest.approx((10 / 11 + 8 / 9) / 2, abs=1e-12)
    assert f1 == pytest.approx(0.89899, abs=1e-5)


def test_absent_class_counts_zero():
    # class 2 never occurs in truth or predictions
    rec, f1 = recall_f1(record([0, 1, 0], [0, 1, 0], 3), 3)
    assert rec == pytest.approx(2 / 3) and f1 == pytest.approx(2 / 3)
    assert recall_f1_from_confusion(np.zeros((2, 2))) == (0.0, 0.0)


def test_macro_f1_is_one_only_for_diagonal():
    assert recall_f1_from_confusion(np.diag([3, 4, 5]))[1] == 1.0
    assert recall_f1_from_confusion([[3, 1, 0], [0, 4, 0], [0, 0, 5]])[1] < 1.0


def test_auc_examples():
    assert auc_binary([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc_binary([0.5] * 6, [0, 1, 0, 1, 1, 0]) == 0.5
    assert auc_binary([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    with pytest.raises(ValueError):
        auc_binary([0.1, 0.2], [1, 1])


def test_auc_matches_brute_force_1000():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(2, 40))
        labels = rng.integers(0, 2, n)
        labels[:2] = [0, 1]
        # coarse grid so ties are common
        scores = rng.integers(0, 6, n) / 5.0 if rng.random() < 0.5 else rng.random(n)
        assert abs(auc_binary(scores, labels) - brute_auc(scores, labels)) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(2, 5), st.integers(5, 40))
def test_metrics_permutation_invariant_and_bounded(seed, k, n):
    rng = np.random.default_rng(seed)
    scores = rng.dirichlet(np.ones(k), size=n)
    labels = rng.integers(0, k, n)
    if k == 2:
        labels[:2] = [0, 1]
    a = evaluate_record(EvalRecord(scores, labels), k)
    perm = rng.permutation(n)
    b = evaluate_record(EvalRecord(scores[perm], labels[perm]), k)
    assert a.keys() == b.keys()
    for key in a:
        assert a[key] == pytest.approx(b[key], abs=1e-12)
    assert 0 <= a["accuracy"] <= 100 and 0 <= a["recall"] <= 1 and 0 <= a["f1"] <= 1
    assert ("auc" in a) == (k == 2)


def test_aggregation():
    m, s = mean_std([99.4, 99.7, 99.9])
    assert m == pytest.approx(99.667, abs=5e-4)
    assert s == pytest.approx(0.252, abs=5e-4)
    assert format_pm([99.4, 99.7, 99.9]) == "99.67±0.25"
    assert mean_std([97.0] * 5) == (97.0, 0.0)
    agg = aggregate([{"epoch": 3, "accuracy": a} for a in (99.4, 99.7, 99.9)])
    assert list(agg) == ["accuracy"] and agg["accuracy"]["std"] == pytest.approx(0.2517, abs=1e-4)


def test_append_log_is_sorted_json(tmp_path):
    p = tmp_path / "log.jsonl"
    append_log(p, {"b": 1, "a": 0.5})
    append_log(p, {"a": 2})
    lines = p.read_text().splitlines()
    assert lines[0] == '{"a": 0.5, "b": 1}'
    assert json.loads(lines[1]) == {"a": 2}
