import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from modules.errors import ContractError, UndefinedMetricError

logger = logging.getLogger(__name__)

METRIC_NAMES = ("accuracy", "kappa", "auroc")


@dataclass
class MetricScores:
    accuracy: float
    kappa: float
    auroc: Optional[float]
    n_samples: int

    def as_row(self):
        return {"accuracy": self.accuracy, "kappa": self.kappa,
                "auroc": np.nan if self.auroc is None else self.auroc,
                "n_samples": self.n_samples}


def _paired(pred, true):
    pred = np.asarray(pred)
    true = np.asarray(true)
    if pred.shape != true.shape or pred.ndim != 1:
        raise ContractError(f"predictions {pred.shape} and labels {true.shape} must be equal-length vectors")
    if pred.size == 0:
        raise ContractError("metrics need at least one sample")
    return pred, true


def accuracy(pred, true):
    pred, true = _paired(pred, true)
    return float(np.mean(pred == true))


def cohen_kappa(pred, true):
    """(p_o - p_e) / (1 - p_e); 0 when chance agreement is already 1."""
    pred, true = _paired(pred, true)
    labels = np.union1d(pred, true)
    p_o = float(np.mean(pred == true))
    p_e = float(sum(np.mean(pred == c) * np.mean(true == c) for c in labels))
    if p_e == 1.0:
        return 0.0
    return (p_o - p_e) / (1.0 - p_e)


def auroc(scores, true):
    """Mann-Whitney pair statistic over positives (label 1) vs negatives, ties count 1/2."""
    scores, true = _paired(scores, true)
    positive = true == 1
    n_pos = int(positive.sum())
    n_neg = true.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC is undefined when only one class is present")
    ranks = rankdata(scores, method="average")
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def score_predictions(pred, true, positive_scores):
    try:
        auc = auroc(positive_scores, true)
    except UndefinedMetricError:
        logger.warning("AUROC undefined on a single-class set; reported as absent")
        auc = None
    return MetricScores(accuracy=accuracy(pred, true), kappa=cohen_kappa(pred, true),
                        auroc=auc, n_samples=int(len(true)))


def mean_std(values):
    """Arithmetic mean and n-1 standard deviation (0 for a single value); NaNs dropped."""
    arr = np.asarray(values, dtype=np.float64)
    arr = arr[~np.isnan(arr)]
    if arr.size == 0:
        return float("nan"), float("nan")
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return float(np.mean(arr)), std


def aggregate(rows):
    """Mean and sample std per metric over per-run MetricScores."""
    rows = list(rows)
    out = {}
    for name in METRIC_NAMES:
        values = [np.nan if getattr(r, name) is None else getattr(r, name) for r in rows]
        out[name] = mean_std(values)
    return out


def format_mean_std(mean, std):
    """(0.89, 0.039) -> '89.0 [3.9]'."""
    if np.isnan(mean):
        return "n/a"
    return f"{100 * mean:.1f} [{100 * std:.1f}]"
