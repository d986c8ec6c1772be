import numpy as np

from modules.numerics.tensor import backward, no_grad


def finite_difference_check(f, x, eps=1e-6):
    """
    Compare the analytic gradient of the scalar function `f` at `x` with a
    central difference. `x` must require grad and `f` must be deterministic;
    `eps` is expected in [1e-7, 1e-3].

    Returns the max over coordinates of |a - n| / max(1e-8, |a| + |n|).
    """
    x.zero_grad()
    loss = f(x)
    backward(loss)
    analytic = x.grad.copy()

    numeric = np.zeros_like(x.values)
    with no_grad():
        for idx in np.ndindex(x.shape):
            original = x.values[idx]
            x.values[idx] = original + eps
            plus = f(x).item()
            x.values[idx] = original - eps
            minus = f(x).item()
            x.values[idx] = original
            numeric[idx] = (plus - minus) / (2.0 * eps)

    x.zero_grad()
    err = np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    return float(err.max()) if err.size else 0.0
