import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from modules.data.generator import Sample
from modules.errors import ConfigError, SamplerContractError

logger = logging.getLogger(__name__)

BATCH_SIZE = 10


@dataclass
class Batch:
    random_part: List[Sample]
    center_part: List[Sample] = field(default_factory=list)


def _num_classes(train_set, num_classes):
    if num_classes is not None:
        return num_classes
    return max(s.class_label for s in train_set) + 1


class BatchSampler:
    """
    Per step: `batch_size` draws without replacement from the whole training
    set, plus one uniform draw per class from its target-domain samples.
    The two parts are independent, so they may overlap.
    """

    def __init__(self, train_set, num_classes=None, batch_size=BATCH_SIZE):
        if len(train_set) < batch_size:
            raise ConfigError(f"training set of {len(train_set)} samples is smaller than the batch size {batch_size}")
        self.train_set = list(train_set)
        self.batch_size = batch_size
        n = _num_classes(self.train_set, num_classes)
        self.target_pools = [
            np.array([i for i, s in enumerate(self.train_set)
                      if s.domain_role == "target" and s.class_label == c], dtype=np.int64)
            for c in range(n)
        ]
        missing = [c for c, pool in enumerate(self.target_pools) if pool.size == 0]
        if missing:
            raise SamplerContractError(f"no target-domain training samples for classes {missing}")

    def draw_indices(self, rng):
        random_idx = rng.choice(len(self.train_set), size=self.batch_size, replace=False)
        center_idx = np.array([pool[rng.integers(pool.size)] for pool in self.target_pools], dtype=np.int64)
        return random_idx, center_idx

    def sample(self, rng):
        random_idx, center_idx = self.draw_indices(rng)
        return Batch(random_part=[self.train_set[i] for i in random_idx],
                     center_part=[self.train_set[i] for i in center_idx])


def sample_batch(train_set, rng, num_classes=None):
    return BatchSampler(train_set, num_classes).sample(rng)


class ClassAwareSampler:
    """Fills batch slots by cycling over the (domain role, class) cells."""

    def __init__(self, train_set, num_classes=None, batch_size=BATCH_SIZE):
        self.train_set = list(train_set)
        if not self.train_set:
            raise ConfigError("class-aware sampling needs a non-empty training set")
        self.batch_size = batch_size
        n = _num_classes(self.train_set, num_classes)
        roles = sorted({s.domain_role for s in self.train_set})
        self.cells = []
        for role in roles:
            for c in range(n):
                members = np.array([i for i, s in enumerate(self.train_set)
                                    if s.domain_role == role and s.class_label == c], dtype=np.int64)
                if members.size == 0:
                    raise ConfigError(f"class-aware sampling: cell (role={role}, class={c}) is empty")
                self.cells.append(members)
        self.cursor = 0

    def draw_indices(self, rng):
        picks = {}
        for _ in range(self.batch_size):
            cell = self.cursor % len(self.cells)
            picks[cell] = picks.get(cell, 0) + 1
            self.cursor += 1
        out = []
        for cell in sorted(picks):
            members = self.cells[cell]
            count = picks[cell]
            out.extend(rng.choice(members, size=count, replace=count > members.size))
        return np.array(out, dtype=np.int64), np.zeros(0, dtype=np.int64)

    def sample(self, rng):
        random_idx, _ = self.draw_indices(rng)
        return Batch(random_part=[self.train_set[i] for i in random_idx])


def class_aware_batches(train_set, rng, num_classes=None, batch_size=BATCH_SIZE):
    """Endless stream of class-aware batches."""
    sampler = ClassAwareSampler(train_set, num_classes, batch_size)
    while True:
        yield sampler.sample(rng)


def class_domain_weights(train_set):
    """N_total / (num_cells * N_cell) per sample, cells keyed by (domain role, class)."""
    if not train_set:
        raise ConfigError("class/domain weights need a non-empty training set")
    keys = [(s.domain_role, s.class_label) for s in train_set]
    counts = {}
    for key in keys:
        counts[key] = counts.get(key, 0) + 1
    total = len(keys)
    return np.array([total / (len(counts) * counts[key]) for key in keys], dtype=np.float64)
