"""Aggregations over the toolkit's results.csv.

The plot layer is read-only over the CSV: it never re-runs samplers.  Every
aggregate the figures draw is computed here so tests can recompute them
independently and compare to 1e-12.
"""

import numpy as np
import pandas as pd

QUANTILE_LEVELS = (5, 25, 50, 75, 95)

FIG1_COLUMNS = ("grid_id", "C", "seed", "estimator", "error", "status")
FIG2_COLUMNS = ("d", "arm", "estimator", "rel_error", "status")


class SchemaError(ValueError):
    """The CSV is missing a column the figure needs."""


def load_results(path, required):
    frame = pd.read_csv(path, dtype={"status": str})
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise SchemaError(f"results file lacks column(s): {missing}")
    return frame


def fig1_aggregate(frame):
    """Per-C error quantiles (each moment component) and MSE.

    MSE at C is the mean over replicates of the squared error summed over
    components.  Quantile levels are {5, 25, 50, 75, 95} percent (an
    implementer convention, documented rather than claimed from elsewhere).
    Returns (quantiles, mse): quantiles maps (C, component) -> array of 5
    values, mse maps C -> float.
    """
    ok = frame[frame["status"] == "ok"].copy()
    if ok.empty:
        raise SchemaError("no usable rows with status == 'ok'")
    moment = ok[ok["estimator"].str.startswith("moment")]
    if moment.empty:
        raise SchemaError("no moment rows; is this a fig1 results file?")
    quantiles, mse = {}, {}
    for c_val, group in moment.groupby("C"):
        for comp, sub in group.groupby("estimator"):
            errs = sub["error"].to_numpy(dtype=float)
            quantiles[(c_val, comp)] = np.percentile(errs, QUANTILE_LEVELS)
        per_rep = group.groupby("grid_id")["error"].apply(
            lambda e: float(np.sum(np.asarray(e, dtype=float) ** 2)))
        mse[c_val] = float(per_rep.mean())
    return quantiles, mse


def fig2_aggregate(frame):
    """Relative-error samples grouped by (d, arm, estimator), with their
    box statistics (quartiles and median).

    Returns (groups, stats): groups maps the key to the raw |Zhat/Z - 1|
    values in file order, stats maps it to (q25, median, q75).
    """
    ok = frame[frame["status"] == "ok"].copy()
    if ok.empty:
        raise SchemaError("no usable rows with status == 'ok'")
    z_rows = ok[ok["estimator"].isin(["log_z_means", "log_z_medians"])]
    if z_rows.empty:
        raise SchemaError("no normalising-constant rows; is this a fig2 "
                          "results file?")
    groups, stats = {}, {}
    for key, sub in z_rows.groupby(["d", "arm", "estimator"]):
        vals = sub["rel_error"].to_numpy(dtype=float)
        groups[key] = vals
        stats[key] = tuple(np.percentile(vals, (25, 50, 75)))
    return groups, stats
