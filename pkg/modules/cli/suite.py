import os
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List

import pandas as pd

from modules.cli.config import emit_config
from modules.cli.projection import dump_latent_projection
from modules.data.generator import generate_dataset
from modules.io_utils import write_csv_atomic, write_json_atomic, write_text_atomic
from modules.metrics.scores import METRIC_NAMES, format_mean_std, mean_std
from modules.model.checkpoint import save_checkpoint
from modules.trainer.experiment import (
    EVAL_DOMAINS,
    RESULT_COLUMNS,
    derive_seeds,
    run_experiment,
    training_set_label,
)

logger = logging.getLogger(__name__)

DOMAIN_HEADINGS = {"target": "Target Domain", "source": "Source Domain"}
METRIC_HEADINGS = {"accuracy": "accuracy", "kappa": "kappa", "auroc": "AUROC"}


@dataclass
class SuiteResult:
    output_dir: str
    results: pd.DataFrame
    summary: pd.DataFrame
    failed_variants: List[str] = field(default_factory=list)
    partial_variants: Dict[str, int] = field(default_factory=dict)

    @property
    def exit_code(self):
        return 1 if self.failed_variants else 0


def _metadata(cfg):
    return {
        "config": emit_config(cfg).splitlines(),
        "dataset_nuisance_to_signal_ratio": cfg.dataset.nuisance_ratio,
        "run_seeds": {str(i): derive_seeds(cfg.master_seed, i) for i in range(cfg.n_runs)},
        "decisions": {
            "weight_decay_groups": ["theta_E", "theta_C"],
            "center_points": "re-projected to the unit sphere after every step, no weight decay",
            "loss_reduction": "L_cls and L_latent averaged over the random batch, L_cen summed over one target sample per class",
            "validation_quantity": {v.value: v.validation_quantity for v in cfg.variants},
            "checkpoint_on_stop": "best target validation loss",
        },
    }


def summary_table(results, variants):
    """One row per variant: training set plus 'mean [std]' cells per domain and metric."""
    rows = []
    for variant in variants:
        part = results[results["variant"] == variant]
        if part.empty:
            continue
        row = {"variant": variant, "set": part["set"].iloc[0]}
        for domain in EVAL_DOMAINS:
            sub = part[part["domain"] == domain]
            for name in METRIC_NAMES:
                column = f"{DOMAIN_HEADINGS[domain]} {METRIC_HEADINGS[name]}"
                if sub.empty:
                    row[column] = "n/a"
                    continue
                row[column] = format_mean_std(*mean_std(sub[name].to_numpy(dtype=float)))
        rows.append(row)
    return pd.DataFrame(rows)


def summary_markdown(summary):
    headers = list(summary.columns)
    lines = ["| " + " | ".join(headers) + " |", "|" + "---|" * len(headers)]
    for _, row in summary.iterrows():
        lines.append("| " + " | ".join(str(row[h]) for h in headers) + " |")
    return "\n".join(lines) + "\n"


def run_suite(cfg):
    """Run every configured variant and write results, summary, logs and checkpoints."""
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    write_json_atomic(_metadata(cfg), os.path.join(out, "metadata.json"))

    frames = []
    failed, partial = [], {}
    for variant in cfg.variants:
        logger.info(f"Running {variant.value} ({cfg.n_runs} runs, training set: {training_set_label(cfg.train_pool)})")
        experiment = run_experiment(cfg, variant)
        if experiment.fully_failed:
            logger.error(f"{variant.value}: all {cfg.n_runs} runs failed")
            failed.append(variant.value)
            continue
        if experiment.failures:
            partial[variant.value] = len(experiment.failures)
        frames.append(experiment.rows())
        for run in experiment.runs:
            stem = f"{variant.value}_run{run.run}"
            write_csv_atomic(run.train.log, os.path.join(out, "logs", f"{stem}.csv"))
            save_checkpoint(run.train.model, os.path.join(out, "checkpoints", f"{stem}.json"))
        if cfg.dump_projections and experiment.runs:
            first = experiment.runs[0]
            samples = generate_dataset(replace(cfg.dataset, seed=first.seeds["data"]))
            dump_latent_projection(first.train.model, samples,
                                   os.path.join(out, "projections", f"{variant.value}_run{first.run}.csv"))

    results = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=RESULT_COLUMNS)
    summary = summary_table(results, [v.value for v in cfg.variants])
    write_csv_atomic(results, os.path.join(out, "results.csv"))
    write_csv_atomic(summary, os.path.join(out, "summary.csv"))
    write_text_atomic(summary.to_string(index=False) + "\n", os.path.join(out, "summary.txt"))
    write_text_atomic(summary_markdown(summary), os.path.join(out, "summary.md"))
    logger.info(f"Saved results and summary to {out}")
    if not summary.empty:
        logger.info("\n" + summary.to_string(index=False))
    return SuiteResult(output_dir=out, results=results, summary=summary,
                       failed_variants=failed, partial_variants=partial)
