import logging

import numpy as np

from modules.errors import ConfigError, UnsupportedVariantError
from modules.numerics.tensor import Tensor

logger = logging.getLogger(__name__)

MIN_START_SEPARATION = 0.5


def init_center_points(n, m, seed):
    """Isotropic Gaussian rows normalized to the unit sphere (theta_O start)."""
    if n < 2 or m < 2:
        raise ConfigError(f"center points need n >= 2 and m >= 2, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    while True:
        rows = rng.standard_normal((n, m))
        rows /= np.linalg.norm(rows, axis=1, keepdims=True)
        if n != 2 or np.linalg.norm(rows[0] - rows[1]) >= MIN_START_SEPARATION:
            break
        logger.debug("Rejected a near-degenerate pair of start centers, resampling")
    return Tensor(rows, requires_grad=True)


def fixed_center_points(n, m):
    """Antipodal centers (1,...,1)/sqrt(m) and (-1,...,-1)/sqrt(m), frozen."""
    if n != 2:
        raise UnsupportedVariantError(f"fixed center points are defined for 2 classes only, got n={n}")
    v = np.ones((2, m))
    v[1] = -1.0
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return Tensor(v, requires_grad=False)


def project_rows_to_sphere(centers):
    """Rescale every row of `centers` to unit norm in place."""
    norms = np.linalg.norm(centers.values, axis=1, keepdims=True)
    centers.values /= norms


def min_pairwise_distance(centers):
    rows = centers.values if isinstance(centers, Tensor) else np.asarray(centers)
    n = rows.shape[0]
    return min(float(np.linalg.norm(rows[i] - rows[k])) for i in range(n) for k in range(i + 1, n))


def max_norm_deviation(centers):
    rows = centers.values if isinstance(centers, Tensor) else np.asarray(centers)
    return float(np.max(np.abs(np.linalg.norm(rows, axis=1) - 1.0)))
