"""Moment estimates and normalising-constant estimators.

The product-of-means estimator is the running product of mean incremental
weights accumulated by the samplers.  The product-of-medians estimator takes,
per iteration, the median over J independent runs of the estimated ratio
Z_t/Z_{t-1} and multiplies across iterations; medians are taken per ratio and
never over whole products, which is a different (and unprotected) estimator.

The median here follows the smallest-index counting rule: the element x_i
with the smallest i such that at least J/2 entries are <= x_i and at least
J/2 are >= x_i.  For even J and ties this differs from midpoint conventions;
the robustness guarantee is proved for this exact rule.  A midpoint variant
exists behind a flag for comparison plots only.
"""

import warnings as _warnings
from dataclasses import dataclass

import numpy as np

from .errors import AbortedRunError

__all__ = [
    "MedianSpec", "ZEstimate", "paper_median", "moment_estimate",
    "moment_estimate_weighted", "z_product_of_means", "z_product_of_medians",
]


@dataclass
class MedianSpec:
    """Number of independent runs feeding the median; odd J recommended."""

    J: int

    def __post_init__(self):
        if self.J < 1:
            raise ValueError(f"J must be >= 1, got {self.J}")
        if self.J % 2 == 0:
            _warnings.warn(f"even J={self.J}: the counting median is biased "
                           "towards the lower middle value", stacklevel=2)


def paper_median(values):
    """Median by the smallest-index counting rule.

    Returns the element x_i where i is the smallest index with
    #{j : x_j <= x_i} >= J/2 and #{j : x_j >= x_i} >= J/2.  Always an element
    of ``values``, never an interpolated midpoint.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("median of an empty sequence")
    half = v.size / 2.0
    # count conditions only depend on the value's rank; scan in index order
    for x in v:
        if np.sum(v <= x) >= half and np.sum(v >= x) >= half:
            return float(x)
    raise AssertionError("unreachable: some order statistic satisfies both counts")


def moment_estimate(cloud, f):
    """Unweighted mean of f over the final pool.

    The pool after the final move targets the second-to-last distribution;
    this estimator is the one the finite-sample moment guarantees cover.
    ``f`` maps (n, d) positions to (n,) or (n, k) values.
    """
    vals = np.asarray(f(cloud.positions), dtype=float)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        idx = int(np.argwhere(bad)[0][0])
        raise ValueError(f"non-finite value of f at particle {idx}")
    return np.mean(vals, axis=0)


def moment_estimate_weighted(cloud, f):
    """Self-normalised weighted mean sum W_n f(X_n).

    Targets the *final* distribution but carries no finite-sample guarantee
    from the theory implemented here; exposed for diagnostics only.
    """
    vals = np.asarray(f(cloud.positions), dtype=float)
    w = cloud.normalized_weights()
    return np.tensordot(w, vals, axes=(0, 0))


@dataclass
class ZEstimate:
    """A normalising-constant estimate in log space, with the per-iteration
    ratio estimates that produced it (J x (T+1) for medians)."""

    log_value: float
    kind: str
    per_t_ratios: np.ndarray


def z_product_of_means(record):
    """Zhat_T as the product of mean incremental weights of one run.

    Matches the record's running logZ bit-exactly.
    """
    if record is None or record.final is None:
        raise AbortedRunError(-1)
    log_value = float(np.sum(record.log_increments))
    return ZEstimate(log_value=log_value, kind="product_of_means",
                     per_t_ratios=record.ratios())


def z_product_of_medians(ratio_matrix=None, records=None, rule="counting"):
    """Product-of-medians estimate from J independent runs.

    Accepts either the J x (T+1) matrix of per-run ratio estimates
    pi_{t-1}(G_t) or the J run records themselves.  Per iteration t the
    median over the J ratios is taken (counting rule by default,
    ``rule="midpoint"`` for the conventional median), then multiplied across
    t in log space.  Aborted or missing runs are an error: partial medians
    are not defined.
    """
    if records is not None:
        for j, rec in enumerate(records):
            if rec is None or rec.final is None:
                raise AbortedRunError(j)
        ratio_matrix = np.stack([rec.ratios() for rec in records])
    ratios = np.asarray(ratio_matrix, dtype=float)
    if ratios.ndim != 2:
        raise ValueError("expected a J x (T+1) ratio matrix")
    if not np.all(np.isfinite(ratios)):
        raise AbortedRunError(-1)
    if rule == "counting":
        med = np.array([paper_median(col) for col in ratios.T])
    elif rule == "midpoint":
        med = np.median(ratios, axis=0)
    else:
        raise ValueError(f"unknown median rule {rule!r}")
    return ZEstimate(log_value=float(np.sum(np.log(med))),
                     kind="product_of_medians", per_t_ratios=ratios)
