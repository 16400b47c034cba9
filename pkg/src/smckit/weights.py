"""Numerically safe importance-weight arithmetic.

Weights live in log space everywhere; linear weights only materialise after a
log-sum-exp shift.  Heavy-tailed reweighting functions overflow in linear
space, so none of these helpers exponentiate unshifted values.
"""

import numpy as np

from .errors import DegenerateCloudError

__all__ = ["log_mean_exp", "normalize_log_weights", "ess", "relative_ess"]


def log_mean_exp(logw):
    """log(mean(exp(logw))), robust to large negative/positive entries."""
    logw = np.asarray(logw, dtype=float)
    n = logw.size
    m = np.max(logw)
    if not np.isfinite(m):
        if m == -np.inf:
            return -np.inf
        raise ValueError("log weights contain NaN or +inf")
    return m + np.log(np.sum(np.exp(logw - m))) - np.log(n)


def normalize_log_weights(logw, t=None):
    """Normalised linear weights from log weights.

    Returns ``W`` with ``W.sum() == 1`` up to 1e-12.  Raises
    :class:`DegenerateCloudError` when every weight underflows to zero
    (all ``logw`` equal to -inf), carrying the iteration index ``t``.
    """
    logw = np.asarray(logw, dtype=float)
    if np.any(np.isnan(logw)):
        raise ValueError("log weights contain NaN")
    m = np.max(logw)
    if m == -np.inf:
        raise DegenerateCloudError(t if t is not None else -1)
    w = np.exp(logw - m)
    return w / np.sum(w)


def ess(logw):
    """Effective sample size (sum w)^2 / sum w^2, in [1, N]."""
    W = normalize_log_weights(logw)
    return 1.0 / np.sum(W * W)


def relative_ess(logw):
    """ESS / N, in (0, 1]."""
    logw = np.asarray(logw, dtype=float)
    return ess(logw) / logw.size
