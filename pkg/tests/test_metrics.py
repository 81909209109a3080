import numpy as np
import pytest
from sklearn.metrics import roc_auc_score

from TA_Errors import LengthMismatchError, SingleClassError
from TA_Metrics import (
    Confusion, accuracy_f1, confusion, evaluate, jaccard, report_to_frame, roc_curve,
    summarize_folds,
)
from TA_SignNet import ATTRIBUTES


def test_confusion_counts():
    c = confusion([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    assert (c.tp, c.fp, c.tn, c.fn) == (2, 1, 1, 1)
    assert c.total == 5


def test_confusion_length_mismatch():
    with pytest.raises(LengthMismatchError):
        confusion([1, 0], [1, 0, 1])
    with pytest.raises(LengthMismatchError):
        confusion([], [])


def test_accuracy_f1_example():
    acc, f1 = accuracy_f1(Confusion(tp=3, tn=0, fp=1, fn=1))
    assert acc == pytest.approx(0.6)
    assert f1 == pytest.approx(0.75)


def test_all_correct():
    assert accuracy_f1(confusion([1, 0, 1], [1, 0, 1])) == (1.0, 1.0)


def test_f1_without_positives_is_zero():
    acc, f1 = accuracy_f1(confusion([0, 0, 0], [0, 0, 0]))
    assert acc == 1.0 and f1 == 0.0


def test_jaccard_examples():
    assert jaccard([[1, 1, 0]], [[1, 0, 0]]) == pytest.approx(0.5)
    assert jaccard([[0, 0, 0]], [[0, 0, 0]]) == 1.0
    assert jaccard([[1, 0], [0, 1]], [[1, 0], [1, 0]]) == pytest.approx(0.5)


def test_jaccard_is_symmetric_and_one_only_on_equality(rng):
    for _ in range(50):
        p = rng.integers(0, 2, size=(10, 8))
        t = rng.integers(0, 2, size=(10, 8))
        assert jaccard(p, t) == jaccard(t, p)
        assert (jaccard(p, t) == 1.0) == bool(np.array_equal(p, t))
        assert jaccard(p, p) == 1.0


def _brute_f1(p, t):
    tp = sum(1 for a, b in zip(p, t) if a == 1 and b == 1)
    fp = sum(1 for a, b in zip(p, t) if a == 1 and b == 0)
    fn = sum(1 for a, b in zip(p, t) if a == 0 and b == 1)
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    return 2 * prec * rec / (prec + rec) if prec + rec else 0.0


def _brute_jaccard(p, t):
    values = []
    for a, b in zip(p, t):
        inter = sum(x & y for x, y in zip(a, b))
        union = sum(x | y for x, y in zip(a, b))
        values.append(1.0 if union == 0 else inter / union)
    return sum(values) / len(values)


def _brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg)
    return wins / (len(pos) * len(neg))


def test_metrics_match_brute_force(rng):
    for _ in range(100):
        n = int(rng.integers(2, 201))
        p = rng.integers(0, 2, size=n)
        t = rng.integers(0, 2, size=n)
        acc, f1 = accuracy_f1(confusion(p, t))
        assert abs(acc - np.mean(p == t)) < 1e-12
        assert abs(f1 - _brute_f1(p.tolist(), t.tolist())) < 1e-12
        ps, ts = rng.integers(0, 2, size=(n, 8)), rng.integers(0, 2, size=(n, 8))
        assert abs(jaccard(ps, ts) - _brute_jaccard(ps.tolist(), ts.tolist())) < 1e-12


def test_auc_matches_sklearn_and_rank_oracle(rng):
    checked = 0
    while checked < 100:
        n = int(rng.integers(2, 201))
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            continue
        # coarse scores force ties
        scores = rng.integers(0, 10, size=n) / 10.0
        _, auc = roc_curve(scores, labels)
        assert abs(auc - roc_auc_score(labels, scores)) < 1e-12
        assert abs(auc - _brute_auc(scores.tolist(), labels.tolist())) < 1e-12
        checked += 1


def test_roc_example_points():
    points, auc = roc_curve([0.9, 0.8, 0.3], [1, 0, 1])
    assert points == [(0.0, 0.0), (0.0, 0.5), (1.0, 0.5), (1.0, 1.0)]
    assert auc == pytest.approx(0.5)


def test_perfect_separation():
    _, auc = roc_curve([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
    assert auc == 1.0


def test_single_class_raises():
    with pytest.raises(SingleClassError):
        roc_curve([0.1, 0.2], [1, 1])


def test_coin_flip_labels_give_chance_auc():
    gen = np.random.default_rng(0)
    scores = gen.random(10000)
    labels = gen.integers(0, 2, size=10000)
    _, auc = roc_curve(scores, labels)
    assert abs(auc - 0.5) <= 0.02


def test_roc_is_monotone_and_invariant_under_monotone_transform(rng):
    scores = rng.random(300)
    labels = (rng.random(300) < scores).astype(int)
    points, auc = roc_curve(scores, labels)
    fpr, tpr = np.array(points).T
    assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)
    assert points[0] == (0.0, 0.0) and points[-1] == (1.0, 1.0)
    _, auc_exp = roc_curve(np.exp(3 * scores), labels)
    assert auc_exp == pytest.approx(auc, abs=1e-12)


def _bits(rng, n=20):
    bits = rng.integers(0, 2, size=(n, 8))
    bits[0] = 1
    bits[1] = 0
    return bits


def test_evaluate_perfect_predictions(rng):
    truth = _bits(rng)
    report = evaluate(truth, truth, scores=truth.astype(float))
    assert report.average_f1 == 1.0
    assert report.average_accuracy == 1.0
    assert report.jaccard == 1.0
    assert set(report.auc) == set(ATTRIBUTES)
    assert all(v == 1.0 for v in report.auc.values())


def test_evaluate_skips_roc_for_single_class_attribute(rng):
    truth = _bits(rng)
    truth[:, 0] = 0
    report = evaluate(truth, truth, scores=rng.random(truth.shape))
    assert "pale" not in report.auc
    assert "crack" in report.auc


def test_report_frame_and_fold_summary(rng):
    truth = _bits(rng)
    reports = [evaluate(rng.integers(0, 2, size=truth.shape), truth) for _ in range(3)]
    frame = report_to_frame(reports[0])
    assert list(frame.index) == list(ATTRIBUTES) + ["average"]
    assert frame.loc["average", "jaccard"] == pytest.approx(reports[0].jaccard)
    summary = summarize_folds(reports)
    expected = np.mean([r.average_f1 for r in reports])
    assert summary.loc["average_f1", "mean"] == pytest.approx(expected)
    assert summary.loc["average_f1", "std"] == pytest.approx(np.std([r.average_f1 for r in reports], ddof=1))


def test_single_fold_summary_has_zero_spread(rng):
    truth = _bits(rng)
    summary = summarize_folds([evaluate(truth, truth)])
    assert (summary["std"] == 0.0).all()
