"""
Loss terms of the L2I objective

    L_total = L_cls + lambda_cen * L_cen + lambda_latent * L_latent

with the gradient routing each term carries:
    L_cls     -> theta_C only         (latent input detached)
    L_cen     -> theta_O and theta_E  (nothing detached)
    L_latent  -> theta_E only         (centers detached)
"""

import logging
from dataclasses import dataclass

import numpy as np

from modules.errors import ConfigError, LabelIndexError, NumericalError, SamplerContractError
from modules.model.network import LatentVector, classify_logits
from modules.numerics import ops
from modules.numerics.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class LossConfig:
    lambda_cen: float = 100.0
    lambda_latent: float = 1.0
    r: float = 0.1
    d: float = 1.9

    def validate(self, margins=True):
        if self.r < 0:
            raise ConfigError(f"loss.r must be >= 0, got {self.r}")
        if not 0 < self.d <= 2:
            raise ConfigError(f"loss.d must satisfy 0 < d <= 2, got {self.d}")
        if margins and not self.d > 2 * self.r:
            raise ConfigError(f"loss.d must exceed 2*loss.r, got d={self.d}, r={self.r}")
        for name in ("lambda_cen", "lambda_latent"):
            if getattr(self, name) < 0:
                raise ConfigError(f"loss.{name} must be >= 0, got {getattr(self, name)}")


@dataclass
class LossBreakdown:
    cls: float
    cen: float
    latent: float
    total: float

    def as_row(self):
        return {"cls": self.cls, "cen": self.cen, "latent": self.latent, "total": self.total}


def _latent_tensor(f):
    return f.f if isinstance(f, LatentVector) else f


def _check_labels(labels, n):
    arr = np.asarray(labels, dtype=np.int64)
    if np.any(arr < 0) or np.any(arr >= n):
        raise LabelIndexError(f"label out of range for {n} classes: {arr.tolist()}")
    return arr


def classification_loss(logits, labels, weights=None):
    """Cross-entropy; batch logits are averaged, optionally with per-sample weights."""
    per_sample = ops.softmax_cross_entropy(logits, labels)
    if per_sample.ndim == 0:
        return per_sample if weights is None else ops.mul(per_sample, float(weights))
    if weights is not None:
        per_sample = ops.mul(per_sample, Tensor(weights))
    return ops.mean(per_sample)


def routed_classification_loss(params, f, labels, weights=None):
    """L_cls on gradient-detached latents, so backward reaches theta_C only."""
    logits = classify_logits(params, _latent_tensor(f).detach())
    return classification_loss(logits, labels, weights)


def _stack_center_targets(f_targets, n):
    if isinstance(f_targets, Tensor):
        if f_targets.ndim != 2 or f_targets.shape[0] != n:
            raise SamplerContractError(f"expected one target latent per class ({n} rows), got shape {f_targets.shape}")
        return f_targets
    by_class = {}
    for lv in f_targets:
        if lv.domain_tag != "target":
            raise SamplerContractError(f"center targets must come from the target domain, got {lv.domain_tag!r}")
        if lv.class_tag in by_class:
            raise SamplerContractError(f"duplicate target latent for class {lv.class_tag}")
        by_class[lv.class_tag] = lv.f
    missing = [i for i in range(n) if i not in by_class]
    if missing or len(by_class) != n:
        raise SamplerContractError(f"missing target latent for classes {missing}")
    return ops.stack([by_class[i] for i in range(n)])


def _pair_term(centers, d):
    # every ordered pair (i, k), k != i, each weighted 1/2
    n = centers.shape[0]
    first, second = np.array([(i, k) for i in range(n) for k in range(n) if k != i]).T
    gaps = ops.norm(ops.sub(ops.take_rows(centers, second), ops.take_rows(centers, first)))
    shortfall = ops.maximum_scalar(ops.sub(d, gaps), 0.0)
    return ops.mul(ops.sum(ops.square(shortfall)), 0.5)


def center_point_loss(f_targets, centers, cfg):
    """
    Sum over classes i of
        max(|f_{i,t} - o_i| - r, 0)^2 + sum_{k != i} 1/2 max(d - |o_k - o_i|, 0)^2

    `f_targets` is either a [n, m] tensor ordered by class or one target-domain
    LatentVector per class.
    """
    n = centers.shape[0]
    f_t = _stack_center_targets(f_targets, n)
    dist = ops.norm(ops.sub(f_t, centers))
    pull = ops.sum(ops.square(ops.maximum_scalar(ops.sub(dist, cfg.r), 0.0)))
    return ops.add(pull, _pair_term(centers, cfg.d))


def latent_loss(f, labels, centers, cfg, reduction="mean"):
    """max(|f - o_label| - r, 0)^2 with the centers detached; batches are reduced."""
    f = _latent_tensor(f)
    n = centers.shape[0]
    label_arr = _check_labels(labels, n)
    anchors = ops.take_rows(centers.detach(), label_arr)
    dist = ops.norm(ops.sub(f, anchors))
    per_sample = ops.square(ops.maximum_scalar(ops.sub(dist, cfg.r), 0.0))
    if per_sample.ndim == 0:
        return per_sample
    return ops.mean(per_sample) if reduction == "mean" else ops.sum(per_sample)


def expected_center_point_loss(f, labels, centers, cfg):
    """
    Center loss averaged over the possible per-class target draws: the pull
    term uses the class-wise mean over all supplied target latents. Used for
    the target-domain validation loss.
    """
    f = _latent_tensor(f)
    n = centers.shape[0]
    label_arr = _check_labels(labels, n)
    dist = ops.norm(ops.sub(f, ops.take_rows(centers, label_arr)))
    pull = ops.square(ops.maximum_scalar(ops.sub(dist, cfg.r), 0.0))
    counts = np.bincount(label_arr, minlength=n)
    if np.any(counts == 0):
        raise SamplerContractError(f"validation set lacks target samples for classes {np.flatnonzero(counts == 0).tolist()}")
    per_sample_weight = 1.0 / counts[label_arr]
    pull = ops.sum(ops.mul(pull, Tensor(per_sample_weight)))
    return ops.add(pull, _pair_term(centers, cfg.d))


def total_loss(cls, cen, latent, cfg):
    """Weighted sum; a term whose weight is 0 (or that is None) is left out of the graph."""
    values = {}
    for name, term in (("cls", cls), ("cen", cen), ("latent", latent)):
        value = 0.0 if term is None else term.item()
        if not np.isfinite(value):
            raise NumericalError(f"loss term {name} is not finite ({value})")
        values[name] = value

    total = cls
    if cen is not None and cfg.lambda_cen != 0:
        total = ops.add(total, ops.mul(cen, cfg.lambda_cen))
    if latent is not None and cfg.lambda_latent != 0:
        total = ops.add(total, ops.mul(latent, cfg.lambda_latent))

    breakdown = LossBreakdown(
        cls=values["cls"],
        cen=values["cen"],
        latent=values["latent"],
        total=values["cls"] + cfg.lambda_cen * values["cen"] + cfg.lambda_latent * values["latent"],
    )
    return total, breakdown
