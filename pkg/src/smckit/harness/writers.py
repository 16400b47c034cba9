"""Result serialization: results.csv, diagnostics.jsonl, manifest.json.

Floats are written with 17 significant digits so parsing the CSV back gives
bit-identical values.  Row order follows the task grid, never completion
order; re-running an experiment reproduces results.csv byte for byte apart
from the wall-time column.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

RESULT_COLUMNS = [
    "config_hash", "experiment", "grid_id", "arm", "d", "algorithm",
    "estimator", "C", "seed", "value", "reference", "rel_error", "error",
    "markov_steps", "status", "diag_id", "wall_time_s",
]


def fmt_float(x):
    if x is None:
        return ""
    x = float(x)
    if np.isnan(x):
        return "nan"
    return format(x, ".17g")


@dataclass
class ResultRow:
    """One estimate from one replicate; empty fields serialize as ""."""

    config_hash: str
    experiment: str
    grid_id: int
    seed: int
    algorithm: str
    estimator: str
    arm: str = ""
    d: int = None
    C: float = None
    value: float = None
    reference: float = None
    rel_error: float = None
    error: float = None
    markov_steps: int = 0
    status: str = "ok"
    diag_id: int = None
    wall_time_s: float = 0.0

    def as_csv(self):
        return [
            self.config_hash, self.experiment, str(self.grid_id), self.arm,
            "" if self.d is None else str(self.d), self.algorithm,
            self.estimator, fmt_float(self.C), str(self.seed),
            fmt_float(self.value), fmt_float(self.reference),
            fmt_float(self.rel_error), fmt_float(self.error),
            str(self.markov_steps), self.status,
            "" if self.diag_id is None else str(self.diag_id),
            fmt_float(self.wall_time_s),
        ]


def write_results(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow(row.as_csv())


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def diagnostics_from_record(record):
    """Per-iteration diagnostics of one run, JSON-ready."""
    return {
        "algorithm": record.algorithm,
        "M": record.M,
        "seed": record.seed,
        "chain_lengths": record.chain_lengths.tolist(),
        "log_increments": record.log_increments.tolist(),
        "rel_ess": record.rel_ess.tolist(),
        "acc_rates": [None if np.isnan(a) else float(a)
                      for a in record.acc_rates],
        "lambdas": None if record.lambdas is None else record.lambdas.tolist(),
        "logZ": record.logZ,
        "markov_steps": record.markov_steps,
        "warnings": record.warnings,
    }


def write_diagnostics(path, diags):
    with open(path, "w") as fh:
        for diag in diags:
            fh.write(json.dumps(_jsonable(diag), sort_keys=True) + "\n")


def write_manifest(path, manifest):
    with open(path, "w") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
