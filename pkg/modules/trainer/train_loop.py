import logging
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import pandas as pd

from modules.data.generator import select, to_arrays
from modules.data.sampler import Batch, BatchSampler, ClassAwareSampler, class_domain_weights
from modules.errors import ConfigError, EvaluationError, NumericalError, SamplerContractError
from modules.losses.l2i_losses import (
    LossConfig,
    center_point_loss,
    classification_loss,
    expected_center_point_loss,
    latent_loss,
    routed_classification_loss,
    total_loss,
)
from modules.metrics.scores import score_predictions
from modules.model.centers import max_norm_deviation, min_pairwise_distance
from modules.model.network import Model, ModelConfig, build_model, classify_logits, encode, predict
from modules.numerics.tensor import backward, no_grad, reset_graph
from modules.trainer.adam import GroupedAdam, OptimizerConfig
from modules.trainer.variants import Variant

logger = logging.getLogger(__name__)

LOG_COLUMNS = ["step", "cls", "cen", "latent", "total", "val_loss", "val_accuracy",
               "min_center_distance", "max_center_norm_deviation"]
DOMAIN_FILTERS = ("source", "target", "all")
TRAIN_POOLS = ("all", "target")


@dataclass
class EarlyStopConfig:
    patience: int = 20
    eval_interval: int = 25
    max_steps: int = 5000

    def validate(self):
        if self.patience < 1:
            raise ConfigError(f"early_stop.patience must be >= 1, got {self.patience}")
        if self.eval_interval < 1:
            raise ConfigError(f"early_stop.eval_interval must be >= 1, got {self.eval_interval}")
        if self.max_steps < 1:
            raise ConfigError(f"early_stop.max_steps must be >= 1, got {self.max_steps}")


@dataclass
class RunConfig:
    variant: Variant
    model: ModelConfig
    loss: LossConfig
    optimizer: OptimizerConfig
    early_stop: EarlyStopConfig
    sampler_seed: int = 0
    train_pool: str = "all"


@dataclass
class TrainResult:
    model: Model
    log: pd.DataFrame
    best_step: int
    best_val_loss: float
    evaluations: int
    stopped_early: bool


class EarlyStopping:
    """Tracks the best validation loss and its parameter snapshot."""

    def __init__(self, patience):
        self.patience = patience
        self.best = float("inf")
        self.best_step = None
        self.snapshot = None
        self.bad_evaluations = 0

    def update(self, step, value, snapshot_fn):
        """Record one evaluation; True once `patience` evaluations in a row failed to improve."""
        if value < self.best:
            self.best = value
            self.best_step = step
            self.snapshot = snapshot_fn()
            self.bad_evaluations = 0
            return False
        self.bad_evaluations += 1
        return self.bad_evaluations >= self.patience


def _center_rows(center_part, num_classes):
    x, y, _, roles = to_arrays(center_part)
    if len(center_part) != num_classes or not np.array_equal(y, np.arange(num_classes)) \
            or any(r != "target" for r in roles):
        raise SamplerContractError("center part needs one target-domain sample per class, in class order")
    return x


@contextmanager
def _named_term(name):
    try:
        yield
    except NumericalError as e:
        raise NumericalError(f"{name}: {e}") from e


def train_step(model, batch, variant, loss_cfg, optimizer, weights=None):
    """Forward, backward and one optimizer step on `batch`; returns the loss breakdown."""
    reset_graph()
    params = model.params
    params.zero_grad()
    cfg = variant.effective_loss_config(loss_cfg)
    x, y, _, _ = to_arrays(batch.random_part)
    with _named_term("encoder"):
        f = encode(params, x)

    cen = latent = None
    if variant.uses_latent_losses:
        with _named_term("encoder"):
            f_t = encode(params, _center_rows(batch.center_part, model.config.num_classes))
        with _named_term("loss term cls"):
            cls = routed_classification_loss(params, f, y, weights)
        with _named_term("loss term cen"):
            cen = center_point_loss(f_t, params.theta_O, cfg)
        with _named_term("loss term latent"):
            latent = latent_loss(f, y, params.theta_O, cfg)
    else:
        with _named_term("loss term cls"):
            cls = classification_loss(classify_logits(params, f), y, weights)

    total, breakdown = total_loss(cls, cen, latent, cfg)
    backward(total)
    optimizer.step()
    return breakdown


def validation_loss(model, x, y, variant, loss_cfg):
    """Target-domain validation loss: L_total for the center-point variants, L_cls otherwise."""
    cfg = variant.effective_loss_config(loss_cfg)
    params = model.params
    with no_grad():
        f = encode(params, x)
        cls = classification_loss(classify_logits(params, f), y)
        if variant.validation_quantity == "cls":
            return cls.item()
        cen = expected_center_point_loss(f, y, params.theta_O, cfg)
        latent = latent_loss(f, y, params.theta_O, cfg)
        _, breakdown = total_loss(cls, cen, latent, cfg)
    return breakdown.total


def evaluate(model, samples, domain_filter="all"):
    """Accuracy, kappa and AUROC (class-1 score) over the filtered samples."""
    if domain_filter not in DOMAIN_FILTERS:
        raise EvaluationError(f"domain filter must be one of {DOMAIN_FILTERS}, got {domain_filter!r}")
    chosen = samples if domain_filter == "all" else select(samples, role=domain_filter)
    if not chosen:
        raise EvaluationError(f"no samples left after filtering on {domain_filter!r}")
    x, y, _, _ = to_arrays(chosen)
    pred, scores = predict(model.params, x)
    return score_predictions(pred, y, scores[:, 1])


def train(run_cfg, samples, validation_fn: Optional[Callable[[Model], float]] = None):
    """
    Sample/step loop with target-domain early stopping. The model is evaluated
    at step 0 and every `eval_interval` steps; the best checkpoint is restored
    when patience runs out or `max_steps` is reached.
    """
    if run_cfg.train_pool not in TRAIN_POOLS:
        raise ConfigError(f"train_pool must be one of {TRAIN_POOLS}, got {run_cfg.train_pool!r}")
    variant = run_cfg.variant
    es = run_cfg.early_stop
    train_set = select(samples, split="train", role=None if run_cfg.train_pool == "all" else "target")
    val_set = select(samples, split="val", role="target")
    if not val_set:
        raise ConfigError("no target-domain validation samples; early stopping needs them")
    if not train_set:
        raise ConfigError("no training samples")

    model = build_model(run_cfg.model, fixed_centers=variant.fixed_centers)
    optimizer = GroupedAdam(model.params, run_cfg.optimizer)
    if variant.class_aware:
        sampler = ClassAwareSampler(train_set, model.config.num_classes)
    else:
        sampler = BatchSampler(train_set, model.config.num_classes)
    weights = class_domain_weights(train_set) if variant.weighted else None
    rng = np.random.default_rng(run_cfg.sampler_seed)

    val_x, val_y, _, _ = to_arrays(val_set)
    if validation_fn is None:
        def validation_fn(m):
            return validation_loss(m, val_x, val_y, variant, run_cfg.loss)

    stopper = EarlyStopping(es.patience)
    rows = []
    evaluations = 0

    def _geometry():
        centers = model.params.theta_O
        return min_pairwise_distance(centers), max_norm_deviation(centers)

    def _evaluate(row):
        nonlocal evaluations
        value = validation_fn(model)
        evaluations += 1
        pred, _ = predict(model.params, val_x)
        row["val_loss"] = value
        row["val_accuracy"] = float(np.mean(pred == val_y))
        logger.debug(f"{variant.value} step {row['step']}: val loss {value:.6f}")
        return stopper.update(row["step"], value, model.params.snapshot)

    gap, dev = _geometry()
    row = {"step": 0, "cls": np.nan, "cen": np.nan, "latent": np.nan, "total": np.nan,
           "min_center_distance": gap, "max_center_norm_deviation": dev}
    stop = _evaluate(row)
    rows.append(row)

    step = 0
    while not stop and step < es.max_steps:
        step += 1
        random_idx, center_idx = sampler.draw_indices(rng)
        batch = Batch(random_part=[train_set[i] for i in random_idx],
                      center_part=[train_set[i] for i in center_idx])
        w = weights[random_idx] if weights is not None else None
        try:
            breakdown = train_step(model, batch, variant, run_cfg.loss, optimizer, w)
        except NumericalError as e:
            raise NumericalError(f"step {step}: {e}") from e
        gap, dev = _geometry()
        row = {"step": step, **breakdown.as_row(), "val_loss": np.nan, "val_accuracy": np.nan,
               "min_center_distance": gap, "max_center_norm_deviation": dev}
        if step % es.eval_interval == 0:
            stop = _evaluate(row)
        rows.append(row)

    model.params.restore(stopper.snapshot)
    logger.info(f"{variant.value}: {'stopped early' if stop else 'reached max steps'} at step {step}, "
                f"best val loss {stopper.best:.6f} at step {stopper.best_step}")
    return TrainResult(model=model, log=pd.DataFrame(rows, columns=LOG_COLUMNS),
                       best_step=stopper.best_step, best_val_loss=stopper.best,
                       evaluations=evaluations, stopped_early=stop)
