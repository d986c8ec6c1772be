import logging

import pandas as pd
from sklearn.decomposition import PCA

from modules.data.generator import to_arrays
from modules.errors import ProjectionError
from modules.io_utils import write_csv_atomic
from modules.model.network import encode
from modules.numerics.tensor import no_grad

logger = logging.getLogger(__name__)

PROJECTION_COLUMNS = ["pc1", "pc2", "class_label", "domain_role"]


def project_latents(model, samples):
    """Latent vectors of `samples` on their top two principal components."""
    if len(samples) < 3:
        raise ProjectionError(f"projection needs at least 3 samples, got {len(samples)}")
    x, y, _, roles = to_arrays(samples)
    with no_grad():
        latents = encode(model.params, x).values
    coords = PCA(n_components=2, svd_solver="full").fit_transform(latents)
    return pd.DataFrame({"pc1": coords[:, 0], "pc2": coords[:, 1],
                         "class_label": y, "domain_role": roles}, columns=PROJECTION_COLUMNS)


def dump_latent_projection(model, samples, out_path):
    df = project_latents(model, samples)
    write_csv_atomic(df, out_path)
    logger.info(f"Saved latent projection of {len(df)} samples to {out_path}")
    return df
