"""
Plain-text experiment configuration: one `section.key = value` per line,
a line starting with `#` is a comment. Omitted keys keep their defaults (the published
hyperparameters for the loss, optimizer and early stopping).

    dataset.domains = target:0:43/43; source:-1:1000/0; source:1:0/1000
    model.encoder_hidden = 64,64
    experiment.variants = L2I,Vanilla
"""

import logging
from dataclasses import dataclass, field, fields
from typing import List

from modules.data.generator import DatasetConfig, DomainSpec
from modules.errors import ConfigError
from modules.losses.l2i_losses import LossConfig
from modules.model.network import ModelConfig
from modules.trainer.adam import OptimizerConfig
from modules.trainer.train_loop import TRAIN_POOLS, EarlyStopConfig
from modules.trainer.variants import ALL_VARIANTS, Variant, parse_variant_list

logger = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    early_stop: EarlyStopConfig = field(default_factory=EarlyStopConfig)
    variants: List[Variant] = field(default_factory=lambda: list(ALL_VARIANTS))
    n_runs: int = 10
    master_seed: int = 0
    output_dir: str = "results"
    train_pool: str = "all"
    workers: int = 1
    dump_projections: bool = False

    def validate(self):
        self.dataset.validate()
        self.model.validate()
        if self.model.input_dim != self.dataset.feature_dim:
            raise ConfigError(f"model.input_dim ({self.model.input_dim}) must equal dataset.feature_dim ({self.dataset.feature_dim})")
        if self.model.num_classes != self.dataset.num_classes:
            raise ConfigError("model and dataset disagree on the number of classes")
        self.loss.validate(margins=any(v.uses_margins for v in self.variants))
        self.optimizer.validate()
        self.early_stop.validate()
        if not self.variants:
            raise ConfigError("experiment.variants must name at least one variant")
        if self.n_runs < 1:
            raise ConfigError(f"experiment.n_runs must be >= 1, got {self.n_runs}")
        if self.workers < 1:
            raise ConfigError(f"experiment.workers must be >= 1, got {self.workers}")
        if self.train_pool not in TRAIN_POOLS:
            raise ConfigError(f"experiment.train_pool must be one of {TRAIN_POOLS}, got {self.train_pool!r}")
        if Variant.FIXED in self.variants and self.dataset.num_classes != 2:
            raise ConfigError("variant Fixed needs dataset.num_classes == 2")
        return self


# value codecs -------------------------------------------------------------

def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text):
    return [int(p) for p in text.split(",") if p.strip()]


def _parse_fractions(text):
    return tuple(float(p) for p in text.split(","))


def _parse_domains(text):
    domains = []
    for index, chunk in enumerate(p for p in text.split(";") if p.strip()):
        parts = [p.strip() for p in chunk.split(":")]
        if len(parts) != 3:
            raise ValueError(f"domain entry {chunk.strip()!r} is not role:offset:counts")
        role, offset, counts = parts
        domains.append(DomainSpec(domain_id=index, nuisance_offset=float(offset), role=role,
                                  class_counts=[int(c) for c in counts.split("/")]))
    return domains


def _emit_domains(domains):
    return "; ".join(f"{d.role}:{d.nuisance_offset!r}:{'/'.join(str(c) for c in d.class_counts)}"
                     for d in domains)


_SECTIONS = {
    "dataset": ("dataset", {"seed"}),
    "model": ("model", {"seed", "num_classes"}),
    "loss": ("loss", set()),
    "optimizer": ("optimizer", set()),
    "early_stop": ("early_stop", set()),
}

_CUSTOM_PARSERS = {
    ("dataset", "domains"): (_parse_domains, _emit_domains),
    ("dataset", "split_fractions"): (_parse_fractions, lambda v: ",".join(repr(float(x)) for x in v)),
    ("model", "encoder_hidden"): (_parse_int_list, lambda v: ",".join(str(x) for x in v)),
}

_EXPERIMENT_KEYS = {
    "variants": (parse_variant_list, lambda v: ",".join(x.value for x in v)),
    "n_runs": (int, str),
    "master_seed": (int, str),
    "output_dir": (str.strip, str),
    "train_pool": (str.strip, str),
    "workers": (int, str),
    "dump_projections": (_parse_bool, lambda v: "true" if v else "false"),
}

_SCALAR = {int: (int, str), float: (float, repr), str: (str.strip, str), bool: (_parse_bool, lambda v: "true" if v else "false")}


def _section_codecs(section):
    attr, hidden = _SECTIONS[section]
    codecs = {}
    for f in fields(getattr(ExperimentConfig(), attr)):
        if f.name in hidden:
            continue
        if (section, f.name) in _CUSTOM_PARSERS:
            codecs[f.name] = _CUSTOM_PARSERS[(section, f.name)]
        else:
            codecs[f.name] = _SCALAR[f.type] if f.type in _SCALAR else _SCALAR[type(f.default)]
    return codecs


def parse_config_text(text, source="<config>"):
    cfg = ExperimentConfig()
    explicit_input_dim = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value', got {raw.strip()!r}")
        name, value = (p.strip() for p in line.split("=", 1))
        if "." not in name:
            raise ConfigError(f"{source}:{lineno}: unknown key {name!r}")
        section, key = name.split(".", 1)
        if section == "experiment":
            codecs = _EXPERIMENT_KEYS
            target = cfg
        elif section in _SECTIONS:
            codecs = _section_codecs(section)
            target = getattr(cfg, _SECTIONS[section][0])
        else:
            raise ConfigError(f"{source}:{lineno}: unknown key {name!r}")
        if key not in codecs:
            raise ConfigError(f"{source}:{lineno}: unknown key {name!r}")
        try:
            parsed = codecs[key][0](value)
        except (ValueError, TypeError) as e:
            raise ConfigError(f"{source}:{lineno}: bad value for {name}: {e}") from None
        setattr(target, key, parsed)
        if name == "model.input_dim":
            explicit_input_dim = True

    if not explicit_input_dim:
        cfg.model.input_dim = cfg.dataset.feature_dim
    cfg.model.num_classes = cfg.dataset.num_classes
    return cfg.validate()


def parse_config(path):
    """Read and validate an experiment config file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return parse_config_text(text, source=str(path))


def emit_config(cfg):
    """Every field as `section.key = value` lines; parse_config_text inverts it."""
    lines = []
    for section, (attr, _) in _SECTIONS.items():
        obj = getattr(cfg, attr)
        for key, (_, emit) in _section_codecs(section).items():
            lines.append(f"{section}.{key} = {emit(getattr(obj, key))}")
        lines.append("")
    for key, (_, emit) in _EXPERIMENT_KEYS.items():
        lines.append(f"experiment.{key} = {emit(getattr(cfg, key))}")
    return "\n".join(lines) + "\n"
