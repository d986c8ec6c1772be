import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from modules.data.generator import generate_dataset, select
from modules.errors import ConfigError, L2IError
from modules.metrics.scores import MetricScores, aggregate
from modules.trainer.train_loop import RunConfig, TrainResult, evaluate, train

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["variant", "set", "run", "domain", "accuracy", "kappa", "auroc", "n_samples"]
EVAL_DOMAINS = ("target", "source")


def derive_seeds(master_seed, run_index):
    """Independent data / model / sampler seeds for one run, shared by every variant."""
    data, model, sampler = np.random.SeedSequence([master_seed, run_index]).generate_state(3)
    return {"data": int(data), "model": int(model), "sampler": int(sampler)}


def training_set_label(train_pool):
    return "target and source" if train_pool == "all" else "target"


@dataclass
class RunResult:
    variant: str
    run: int
    seeds: Dict[str, int]
    scores: Dict[str, MetricScores]
    train: TrainResult


@dataclass
class ExperimentResult:
    variant: str
    train_pool: str
    runs: List[RunResult] = field(default_factory=list)
    failures: List[Tuple[int, str]] = field(default_factory=list)

    @property
    def fully_failed(self):
        return not self.runs

    def rows(self):
        out = []
        for run in self.runs:
            for domain in EVAL_DOMAINS:
                if domain in run.scores:
                    out.append({"variant": self.variant, "set": training_set_label(self.train_pool),
                                "run": run.run, "domain": domain, **run.scores[domain].as_row()})
        return pd.DataFrame(out, columns=RESULT_COLUMNS)

    def summary(self):
        """{domain: {metric: (mean, std)}} over the completed runs."""
        out = {}
        for domain in EVAL_DOMAINS:
            scores = [run.scores[domain] for run in self.runs if domain in run.scores]
            if scores:
                out[domain] = aggregate(scores)
        return out


def run_single(exp_cfg, variant, run_index):
    seeds = derive_seeds(exp_cfg.master_seed, run_index)
    samples = generate_dataset(replace(exp_cfg.dataset, seed=seeds["data"]))
    run_cfg = RunConfig(
        variant=variant,
        model=replace(exp_cfg.model, seed=seeds["model"]),
        loss=exp_cfg.loss,
        optimizer=exp_cfg.optimizer,
        early_stop=exp_cfg.early_stop,
        sampler_seed=seeds["sampler"],
        train_pool=exp_cfg.train_pool,
    )
    logger.info(f"[{variant.value}] run {run_index}: training")
    result = train(run_cfg, samples)
    test = select(samples, split="test")
    scores = {}
    for domain in EVAL_DOMAINS:
        if select(test, role=domain):
            scores[domain] = evaluate(result.model, test, domain)
    return RunResult(variant=variant.value, run=run_index, seeds=seeds, scores=scores, train=result)


def run_experiment(exp_cfg, variant, n_runs=None):
    """
    Train `variant` once per run index on a freshly generated and split
    dataset and score it on the target and source test splits. Failed runs
    are recorded and the rest are kept.
    """
    n_runs = exp_cfg.n_runs if n_runs is None else n_runs
    if n_runs < 1:
        raise ConfigError(f"n_runs must be >= 1, got {n_runs}")
    result = ExperimentResult(variant=variant.value, train_pool=exp_cfg.train_pool)

    def _attempt(run_index):
        try:
            return run_single(exp_cfg, variant, run_index), None
        except L2IError as e:
            logger.warning(f"[{variant.value}] run {run_index} failed: {e}")
            return None, (run_index, str(e))
        except Exception as e:
            logger.error(f"[{variant.value}] run {run_index} crashed: {type(e).__name__}: {e}")
            return None, (run_index, f"{type(e).__name__}: {e}")

    workers = max(1, getattr(exp_cfg, "workers", 1))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_attempt, range(n_runs)))
    else:
        outcomes = [_attempt(i) for i in range(n_runs)]

    for run, failure in outcomes:
        if run is not None:
            result.runs.append(run)
        else:
            result.failures.append(failure)
    if result.failures and result.runs:
        logger.warning(f"[{variant.value}] aggregating over {len(result.runs)} of {n_runs} runs")
    return result
