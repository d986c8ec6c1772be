import logging

import numpy as np
import pandas as pd

from modules.data.generator import ROLES, SPLITS, Sample
from modules.errors import ConfigError
from modules.io_utils import write_csv_atomic

logger = logging.getLogger(__name__)

META_COLUMNS = ["class_label", "domain_label", "domain_role", "split"]


def samples_to_frame(samples):
    dim = len(samples[0].x) if samples else 0
    rows = []
    for s in samples:
        row = {f"x_{j}": float(v) for j, v in enumerate(s.x)}
        row["class_label"] = s.class_label
        row["domain_label"] = s.domain_label
        row["domain_role"] = s.domain_role
        row["split"] = s.split
        rows.append(row)
    return pd.DataFrame(rows, columns=[f"x_{j}" for j in range(dim)] + META_COLUMNS)


def export_dataset_csv(samples, path):
    write_csv_atomic(samples_to_frame(samples), path)
    logger.info(f"Saved {len(samples)} samples to {path}")


def _samples_from_frame(df, path):
    missing = [c for c in META_COLUMNS if c not in df.columns]
    feature_cols = [c for c in df.columns if c.startswith("x_")]
    if missing or not feature_cols:
        raise ConfigError(f"{path} is not a dataset CSV (missing columns {missing or ['x_0']})")
    feature_cols.sort(key=lambda c: int(c[2:]))
    bad_roles = set(df["domain_role"]) - set(ROLES)
    bad_splits = set(df["split"]) - set(SPLITS)
    if bad_roles or bad_splits:
        raise ConfigError(f"{path}: unknown roles {sorted(bad_roles)} or splits {sorted(bad_splits)}")
    x = df[feature_cols].to_numpy(dtype=np.float64)
    return [
        Sample(x=x[i].copy(), class_label=int(row.class_label), domain_label=int(row.domain_label),
               domain_role=str(row.domain_role), split=str(row.split))
        for i, row in enumerate(df[META_COLUMNS].itertuples(index=False))
    ]


def import_dataset_csv(path):
    try:
        return _samples_from_frame(pd.read_csv(path, encoding="utf-8", float_precision="round_trip"), path)
    except ConfigError:
        raise
    except KeyError as e:
        raise ConfigError(f"{path} is missing column {e}") from None
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{path} is not a readable dataset CSV: {e}") from None
