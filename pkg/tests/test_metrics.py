import numpy as np
import pytest
from sklearn.metrics import cohen_kappa_score, roc_auc_score

from modules.errors import ContractError, UndefinedMetricError
from modules.metrics.scores import (
    MetricScores,
    accuracy,
    aggregate,
    auroc,
    cohen_kappa,
    format_mean_std,
    mean_std,
    score_predictions,
)


def test_accuracy_examples():
    assert accuracy([0, 1, 1], [0, 1, 1]) == 1.0
    assert accuracy([0, 1, 1, 1], [0, 0, 1, 1]) == 0.75
    assert accuracy([1, 0], [0, 1]) == 0.0
    with pytest.raises(ContractError):
        accuracy([0, 1], [0, 1, 1])


def test_kappa_examples():
    assert cohen_kappa([0, 1, 0, 1], [0, 1, 0, 1]) == 1.0
    assert cohen_kappa([0, 1, 1, 1, 0, 1], [0, 0, 1, 1, 0, 1]) == pytest.approx(0.666667, abs=1e-6)
    assert cohen_kappa([1, 1, 1, 1], [0, 0, 1, 1]) == 0.0
    assert cohen_kappa([1, 1], [1, 1]) == 0.0


def test_kappa_worked_example():
    # p_o = 0.7, p_e = 0.7 * 0.6 + 0.3 * 0.4 = 0.54
    true = [1] * 6 + [0] * 4
    pred = [1, 1, 1, 1, 1, 0, 1, 1, 0, 0]
    assert accuracy(pred, true) == pytest.approx(0.7)
    assert cohen_kappa(pred, true) == pytest.approx(0.347826, abs=1e-6)

    true = [1] * 5 + [0] * 5
    pred = [1, 1, 1, 1, 0, 1, 1, 0, 0, 0]
    assert cohen_kappa(pred, true) == pytest.approx(0.4, abs=1e-12)


def test_kappa_of_independent_predictions_is_zero():
    true = [0, 0, 1, 1] * 5
    pred = [0, 1, 0, 1] * 5
    assert cohen_kappa(pred, true) == pytest.approx(0.0, abs=1e-12)


def test_kappa_matches_sklearn(rng):
    for _ in range(50):
        true = rng.integers(0, 2, size=40)
        pred = np.where(rng.random(40) < 0.7, true, 1 - true)
        if len(np.unique(np.concatenate([pred, true]))) < 2:
            continue
        assert cohen_kappa(pred, true) == pytest.approx(cohen_kappa_score(true, pred), abs=1e-12)


def test_auroc_examples():
    assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auroc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0
    assert auroc([0.5] * 4, [0, 1, 0, 1]) == 0.5
    with pytest.raises(UndefinedMetricError):
        auroc([0.1, 0.9], [1, 1])


def _brute_force_auroc(scores, true):
    pos = scores[true == 1]
    neg = scores[true == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_auroc_matches_pairwise_definition(rng):
    for _ in range(100):
        size = int(rng.integers(2, 30))
        true = rng.integers(0, 2, size=size)
        true[0], true[1] = 0, 1
        scores = np.round(rng.random(size), 1)
        value = auroc(scores, true)
        assert value == pytest.approx(_brute_force_auroc(scores, true), abs=1e-12)
        assert value == pytest.approx(roc_auc_score(true, scores), abs=1e-12)
        assert 0.0 <= value <= 1.0
        assert auroc(np.exp(3 * scores), true) == pytest.approx(value, abs=1e-12)


def test_metric_ranges_on_random_inputs(rng):
    for _ in range(50):
        true = rng.integers(0, 2, size=25)
        pred = rng.integers(0, 2, size=25)
        assert 0.0 <= accuracy(pred, true) <= 1.0
        assert -1.0 <= cohen_kappa(pred, true) <= 1.0


def test_score_predictions_without_both_classes():
    scores = score_predictions([1, 1, 0], [1, 1, 1], [0.9, 0.8, 0.3])
    assert scores.auroc is None
    assert np.isnan(scores.as_row()["auroc"])
    assert scores.n_samples == 3


def test_mean_std_and_aggregate():
    assert mean_std([0.8, 0.9]) == pytest.approx((0.85, np.sqrt(0.005)), abs=1e-12)
    assert mean_std([0.7]) == (0.7, 0.0)
    rows = [MetricScores(0.8, 0.6, 0.9, 10), MetricScores(0.9, 0.8, None, 10)]
    summary = aggregate(rows)
    assert summary["accuracy"][0] == pytest.approx(0.85)
    assert summary["auroc"] == (0.9, 0.0)


def test_format_mean_std():
    assert format_mean_std(0.89, 0.039) == "89.0 [3.9]"
    assert format_mean_std(float("nan"), float("nan")) == "n/a"
