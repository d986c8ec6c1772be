"""
Synthetic reconstruction of the scanner-bias allocation.

Feature layout of every sample:
    x[0]      class signal, mu * (2c/(n-1) - 1) + noise   (-mu / +mu for two classes)
    x[1:1+K]  nuisance offset of the domain (in units of kappa) * kappa + noise,
              repeated over K = nuisance_dims coordinates
    x[1+K:]   pure noise

Source domains each hold a single class at their own offset, so the offset
predicts the class across the source pool; the target domain holds every
class at one shared offset.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from modules.errors import ConfigError

logger = logging.getLogger(__name__)

ROLES = ("source", "target")
SPLITS = ("train", "val", "test")


@dataclass
class DomainSpec:
    domain_id: int
    nuisance_offset: float
    role: str
    class_counts: List[int]


def default_domains():
    return [
        DomainSpec(domain_id=0, nuisance_offset=0.0, role="target", class_counts=[43, 43]),
        DomainSpec(domain_id=1, nuisance_offset=-1.0, role="source", class_counts=[1000, 0]),
        DomainSpec(domain_id=2, nuisance_offset=1.0, role="source", class_counts=[0, 1000]),
    ]


@dataclass
class DatasetConfig:
    num_classes: int = 2
    feature_dim: int = 40
    nuisance_dims: int = 32
    class_signal: float = 0.5
    nuisance_scale: float = 5.0
    noise_sigma: float = 0.25
    domains: List[DomainSpec] = field(default_factory=default_domains)
    split_fractions: Tuple[float, float, float] = (0.7, 0.15, 0.15)
    seed: int = 0

    @property
    def nuisance_ratio(self):
        return self.nuisance_scale / self.class_signal if self.class_signal else float("inf")

    def validate(self):
        if self.num_classes < 2:
            raise ConfigError(f"dataset.num_classes must be >= 2, got {self.num_classes}")
        if self.feature_dim < 3:
            raise ConfigError(f"dataset.feature_dim must be >= 3, got {self.feature_dim}")
        if self.nuisance_dims < 1:
            raise ConfigError(f"dataset.nuisance_dims must be >= 1, got {self.nuisance_dims}")
        if self.feature_dim < self.nuisance_dims + 1:
            raise ConfigError(f"dataset.feature_dim must leave room for the signal and {self.nuisance_dims} nuisance coordinates, got {self.feature_dim}")
        for name in ("class_signal", "nuisance_scale", "noise_sigma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"dataset.{name} must be >= 0, got {getattr(self, name)}")
        fractions = tuple(self.split_fractions)
        if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
            raise ConfigError(f"dataset.split_fractions must be three non-negative values summing to 1, got {fractions}")
        if not self.domains:
            raise ConfigError("dataset.domains must list at least one domain")

        has_target = False
        sources = []
        for domain in self.domains:
            if domain.role not in ROLES:
                raise ConfigError(f"dataset.domains: role must be one of {ROLES}, got {domain.role!r}")
            if len(domain.class_counts) != self.num_classes:
                raise ConfigError(f"dataset.domains: domain {domain.domain_id} needs {self.num_classes} class counts, got {domain.class_counts}")
            if any(c < 0 for c in domain.class_counts):
                raise ConfigError(f"dataset.domains: negative class count in domain {domain.domain_id}")
            if domain.role == "target":
                has_target = True
                if any(c <= 0 for c in domain.class_counts):
                    raise ConfigError(f"dataset.domains: target domain {domain.domain_id} needs every class count > 0, got {domain.class_counts}")
            else:
                sources.append(domain)
        if not has_target:
            raise ConfigError("dataset.domains must contain a target domain")
        if sources and not any(sum(1 for c in d.class_counts if c > 0) == 1 for d in sources):
            raise ConfigError("dataset.domains: at least one source domain must contribute exactly one class")

        for domain in self.domains:
            for count in domain.class_counts:
                split_sizes(count, fractions, domain.role == "target")


@dataclass(eq=False)
class Sample:
    x: np.ndarray
    class_label: int
    domain_label: int
    domain_role: str
    split: str


def split_sizes(count, fractions, require_every_split=False):
    """Stratified train/val/test sizes for one (domain, class) cell."""
    n_train = int(np.floor(count * fractions[0] + 0.5))
    n_val = int(np.floor(count * fractions[1] + 0.5))
    n_test = count - n_train - n_val
    if n_test < 0:
        raise ConfigError(f"cell of {count} samples cannot be split by {tuple(fractions)}")
    if require_every_split and count > 0:
        for name, size, frac in zip(SPLITS, (n_train, n_val, n_test), fractions):
            if frac > 0 and size == 0:
                raise ConfigError(f"target cell of {count} samples leaves the {name} split empty with fractions {tuple(fractions)}")
    return n_train, n_val, n_test


def class_values(num_classes, class_signal):
    return class_signal * (2.0 * np.arange(num_classes) / (num_classes - 1) - 1.0)


def generate_dataset(cfg):
    """All samples of every (domain, class) cell, split tags assigned per cell."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    signal = class_values(cfg.num_classes, cfg.class_signal)
    samples = []
    for domain in cfg.domains:
        offset = domain.nuisance_offset * cfg.nuisance_scale
        for label, count in enumerate(domain.class_counts):
            if count == 0:
                continue
            x = rng.normal(0.0, cfg.noise_sigma, size=(count, cfg.feature_dim))
            x[:, 0] += signal[label]
            x[:, 1:1 + cfg.nuisance_dims] += offset
            n_train, n_val, _ = split_sizes(count, cfg.split_fractions)
            order = rng.permutation(count)
            tags = np.empty(count, dtype=object)
            tags[order[:n_train]] = "train"
            tags[order[n_train:n_train + n_val]] = "val"
            tags[order[n_train + n_val:]] = "test"
            for row, tag in zip(x, tags):
                samples.append(Sample(x=row, class_label=label, domain_label=domain.domain_id,
                                      domain_role=domain.role, split=tag))
    logger.debug(f"Generated {len(samples)} samples over {len(cfg.domains)} domains")
    return samples


def select(samples, split=None, role=None):
    return [s for s in samples
            if (split is None or s.split == split) and (role is None or s.domain_role == role)]


def to_arrays(samples):
    """Feature matrix, class labels, domain labels and role names of `samples`."""
    x = np.stack([s.x for s in samples]) if samples else np.zeros((0, 0))
    y = np.array([s.class_label for s in samples], dtype=np.int64)
    domains = np.array([s.domain_label for s in samples], dtype=np.int64)
    roles = np.array([s.domain_role for s in samples], dtype=object)
    return x, y, domains, roles


def cell_counts(samples, split: Optional[str] = None):
    counts = {}
    for s in select(samples, split=split):
        key = (s.domain_label, s.class_label)
        counts[key] = counts.get(key, 0) + 1
    return counts
