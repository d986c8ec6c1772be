import argparse
import logging
import os
from dataclasses import replace

import pandas as pd

from modules.cli.config import ExperimentConfig, parse_config
from modules.cli.projection import dump_latent_projection
from modules.cli.suite import run_suite
from modules.data.dataset_io import export_dataset_csv, import_dataset_csv
from modules.data.generator import generate_dataset, select
from modules.errors import ConfigError, L2IError
from modules.io_utils import write_csv_atomic
from modules.log_setup import configure_logging
from modules.model.checkpoint import load_checkpoint
from modules.trainer.experiment import derive_seeds
from modules.trainer.train_loop import DOMAIN_FILTERS, evaluate
from modules.trainer.variants import parse_variant_list

logger = logging.getLogger(__name__)

SPLIT_CHOICES = ("train", "val", "test", "all")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="l2i",
        description="Center-point domain adaptation on synthetic scanner-bias data.",
    )
    parser.add_argument("--log-level", default="INFO", help="logging level (default INFO)")
    sub = parser.add_subparsers(dest="command", metavar="{run,generate-data,eval,project}")
    sub.required = True

    run = sub.add_parser("run", help="train and score every configured variant")
    run.add_argument("--config", help="experiment config file (defaults when omitted)")
    run.add_argument("--out", help="output directory (overrides experiment.output_dir)")
    run.add_argument("--seed", type=int, help="master seed (overrides experiment.master_seed)")
    run.add_argument("--variants", help="comma separated variants, e.g. L2I,Vanilla")
    run.add_argument("--runs", type=int, help="number of runs per variant")
    run.add_argument("--workers", type=int, help="worker threads for the runs of a variant")

    gen = sub.add_parser("generate-data", help="write the synthetic dataset of one run as CSV")
    gen.add_argument("--config")
    gen.add_argument("--out", required=True, help="CSV path, or a directory for dataset.csv")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--run", type=int, default=0, help="run index whose dataset seed is used")

    ev = sub.add_parser("eval", help="score a checkpoint on a dataset CSV")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--split", choices=SPLIT_CHOICES, default="test")
    ev.add_argument("--out", help="optional CSV for the scores")

    proj = sub.add_parser("project", help="dump a 2D PCA projection of the latent vectors")
    proj.add_argument("--checkpoint", required=True)
    proj.add_argument("--data", required=True)
    proj.add_argument("--split", choices=SPLIT_CHOICES, default="all")
    proj.add_argument("--out", required=True, help="CSV path for pc1, pc2, class_label, domain_role")
    return parser


def _load_config(path):
    return parse_config(path) if path else ExperimentConfig().validate()


def _apply_overrides(cfg, args, parser):
    if getattr(args, "seed", None) is not None:
        cfg.master_seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.output_dir = args.out
    if getattr(args, "runs", None) is not None:
        cfg.n_runs = args.runs
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if getattr(args, "variants", None) is not None:
        try:
            cfg.variants = parse_variant_list(args.variants)
        except ConfigError as e:
            parser.error(str(e))
    return cfg.validate()


def _split_samples(samples, split):
    return samples if split == "all" else select(samples, split=split)


def cmd_run(args, parser):
    cfg = _apply_overrides(_load_config(args.config), args, parser)
    result = run_suite(cfg)
    for variant, count in result.partial_variants.items():
        logger.warning(f"{variant}: {count} of {cfg.n_runs} runs failed")
    if result.failed_variants:
        logger.error(f"Variants with no completed run: {', '.join(result.failed_variants)}")
    else:
        logger.info(f"Suite finished, tables in {cfg.output_dir}")
    return result.exit_code


def cmd_generate(args, parser):
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    seed = derive_seeds(cfg.master_seed, args.run)["data"]
    samples = generate_dataset(replace(cfg.dataset, seed=seed))
    path = os.path.join(args.out, "dataset.csv") if os.path.isdir(args.out) else args.out
    export_dataset_csv(samples, path)
    return 0


def cmd_eval(args, parser):
    model = load_checkpoint(args.checkpoint)
    samples = _split_samples(import_dataset_csv(args.data), args.split)
    rows = []
    for domain in DOMAIN_FILTERS:
        if domain != "all" and not select(samples, role=domain):
            continue
        scores = evaluate(model, samples, domain)
        rows.append({"domain": domain, **scores.as_row()})
        auroc = "n/a" if scores.auroc is None else f"{scores.auroc:.4f}"
        logger.info(f"{domain}: accuracy {scores.accuracy:.4f}, kappa {scores.kappa:.4f}, "
                    f"AUROC {auroc} (n={scores.n_samples})")
    if args.out:
        write_csv_atomic(pd.DataFrame(rows), args.out)
    return 0


def cmd_project(args, parser):
    model = load_checkpoint(args.checkpoint)
    samples = _split_samples(import_dataset_csv(args.data), args.split)
    dump_latent_projection(model, samples, args.out)
    return 0


COMMANDS = {
    "run": cmd_run,
    "generate-data": cmd_generate,
    "eval": cmd_eval,
    "project": cmd_project,
}


def cli_main(argv=None):
    """Exit code: 0 success, 1 runtime failure, 2 usage error."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        configure_logging(args.log_level)
        return COMMANDS[args.command](args, parser)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    except (L2IError, OSError) as e:
        logger.error(f"{e}")
        return 1
