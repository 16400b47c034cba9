"""Experiment configuration: schema validation and resolution.

Configs are plain JSON objects.  Validation is strict: unknown keys are
rejected at every level so a typo cannot silently fall back to a default.
``resolve`` fills defaults and normalises shapes; every "auto" that depends
only on the config (schedule constant, kernel scale) is resolved here so the
manifest records the values actually used.
"""

import hashlib
import json

import numpy as np

from ..errors import ConfigError

_EXPERIMENTS = ("single_run", "fig1", "fig2", "sweep", "plan")

# block -> key -> (allowed, default); allowed is a tuple of types, a tuple of
# string choices, or a predicate description; None default means "optional"
_TOP_KEYS = ("experiment", "model", "schedule", "kernel", "algorithm",
             "replication", "output", "estimands", "planner", "fig1", "fig2",
             "sweep")

_BLOCK_KEYS = {
    "model": ("family", "d", "base_mean", "base_cov", "target_mean",
              "target_cov", "sigma2", "mixture", "curvature"),
    "schedule": ("kind", "c", "T", "target_ress", "delta", "lambda0",
                 "delta_min", "final_stationary"),
    "kernel": ("kind", "scale", "h", "rho", "gamma", "precond"),
    "algorithm": ("name", "M", "P", "P_schedule", "C", "J"),
    "replication": ("n_seeds", "master_seed"),
    "output": ("directory", "formats"),
    "planner": ("theorem", "epsilon", "eta", "T", "M", "gamma", "chi_bar_sq",
                "medians", "standard_z_constant"),
    "fig1": ("C_values", "budget", "T", "M", "P0", "n_seeds"),
    "fig2": ("dims", "n_draws", "J", "M_wf", "T_scale", "gamma_scale",
             "p_scale_wf", "m_scale_std", "p_scale_std", "heavy_factor",
             "arms"),
    "sweep": ("parameters",),
}

_DEFAULTS = {
    "schedule": {"kind": "equidistant", "c": "auto", "target_ress": 0.5,
                 "delta_min": 1e-6, "final_stationary": False},
    "kernel": {"kind": "rwm", "scale": "auto", "h": "auto", "rho": "auto"},
    "algorithm": {"name": "wastefree", "M": 4, "J": 1},
    "replication": {"n_seeds": 1, "master_seed": 20260801},
    "output": {"directory": "smc-out", "formats": ["csv", "jsonl", "manifest"]},
}


def _reject_unknown(block_name, block, allowed):
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {block_name!r}: {unknown}")


def validate(cfg):
    """Structural validation; raises ConfigError with the offending key."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown("config", cfg, _TOP_KEYS)
    exp = cfg.get("experiment")
    if exp not in _EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {_EXPERIMENTS}, got {exp!r}")
    for name, keys in _BLOCK_KEYS.items():
        if name in cfg:
            if not isinstance(cfg[name], dict):
                raise ConfigError(f"block {name!r} must be an object")
            _reject_unknown(name, cfg[name], keys)
    if "estimands" in cfg:
        bad = set(cfg["estimands"]) - {"log_z", "moment"}
        if bad:
            raise ConfigError(f"unknown estimand(s): {sorted(bad)}")
    if exp == "single_run" and "model" not in cfg:
        raise ConfigError("single_run needs a model block")
    if exp == "sweep" and "sweep" not in cfg:
        raise ConfigError("sweep needs a sweep block")
    if exp == "plan" and "planner" not in cfg:
        raise ConfigError("plan needs a planner block")
    return cfg


def resolve(cfg):
    """Validated config with defaults filled in (input left untouched)."""
    validate(cfg)
    out = json.loads(json.dumps(cfg))  # deep copy, JSON-clean
    for block, defaults in _DEFAULTS.items():
        merged = dict(defaults)
        merged.update(out.get(block, {}))
        out[block] = merged
    out.setdefault("estimands", ["log_z"])
    algo = out["algorithm"]
    if algo["name"] not in ("standard", "wastefree", "greedy"):
        raise ConfigError(f"unknown algorithm {algo['name']!r}")
    if algo.get("J", 1) < 1:
        raise ConfigError("algorithm.J must be >= 1")
    rep = out["replication"]
    if rep["n_seeds"] < 1:
        raise ConfigError("replication.n_seeds must be >= 1")
    return out


def config_hash(resolved):
    """Short stable digest of a resolved config, carried on every row."""
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Model construction
# ---------------------------------------------------------------------------

def _as_mean(value, d):
    if value is None:
        return np.zeros(d)
    arr = np.asarray(value, dtype=float)
    return np.full(d, float(arr)) if arr.ndim == 0 else arr


def _as_cov(value, d):
    if value is None:
        return np.eye(d)
    arr = np.asarray(value, dtype=float)
    return float(arr) * np.eye(d) if arr.ndim == 0 else arr


def build_model(model_cfg):
    """Model block -> a small bundle the experiment runners consume.

    Returns a dict with the dimension, a ``sequence(lambdas)`` factory, an
    ``oracle(lambdas)`` factory when the family has analytic ground truth
    (Gaussian pairs), curvature constants when derivable, and the analytic
    target mean when known.
    """
    from ..model import (GaussianBase, GaussianOracle, GaussianPotential,
                         MixturePotential, ProductPotential, pseudo_huber)

    family = model_cfg.get("family")
    d = model_cfg.get("d")
    if family is None or d is None:
        raise ConfigError("model block needs 'family' and 'd'")
    d = int(d)

    if family == "gaussian_pair":
        base_mean = _as_mean(model_cfg.get("base_mean"), d)
        base_cov = _as_cov(model_cfg.get("base_cov"), d)
        target_mean = _as_mean(model_cfg.get("target_mean"), d)
        if model_cfg.get("sigma2") is not None:
            target_cov = float(model_cfg["sigma2"]) * np.eye(d)
        else:
            target_cov = _as_cov(model_cfg.get("target_cov"), d)
        curvature = model_cfg.get("curvature")
        if curvature is None:
            # isotropic pairs admit exact constants; otherwise eigen-bounds
            p0 = np.linalg.inv(base_cov)
            p1 = np.linalg.inv(target_cov)
            alpha_q = float(np.min(np.linalg.eigvalsh(p0)))
            dv = p1 - p0
            ev = np.linalg.eigvalsh(dv)
            curvature = (alpha_q, float(ev.min()), float(max(ev.max(), 1e-12)))
        curvature = tuple(float(v) for v in curvature)

        def oracle(lambdas):
            return GaussianOracle(base_mean, base_cov, target_mean,
                                  target_cov, lambdas)

        def sequence(lambdas):
            return oracle(lambdas).sequence(curvature=curvature)

        return {"d": d, "family": family, "sequence": sequence,
                "oracle": oracle, "curvature": curvature,
                "base": lambda: GaussianBase(base_mean, base_cov),
                "target": lambda: GaussianPotential(target_mean, target_cov)}

    if family == "mixture":
        mix_cfg = model_cfg.get("mixture")
        if not mix_cfg:
            raise ConfigError("mixture family needs a 'mixture' sub-block")
        weights = mix_cfg["weights"]
        means = mix_cfg["means"]
        covs = [_as_cov(c, d) for c in mix_cfg["covs"]]
        base_mean = _as_mean(model_cfg.get("base_mean"), d)
        base_cov = _as_cov(model_cfg.get("base_cov"), d)
        target = MixturePotential(weights, means, covs)

        def sequence(lambdas):
            from ..model import GeometricPath
            return GeometricPath(GaussianBase(base_mean, base_cov), target,
                                 lambdas,
                                 curvature=model_cfg.get("curvature"))

        return {"d": d, "family": family, "sequence": sequence,
                "oracle": None, "curvature": model_cfg.get("curvature"),
                "base": lambda: GaussianBase(base_mean, base_cov),
                "target": lambda: target,
                "target_mean": target.mean()}

    if family == "product_form":
        base_mean = _as_mean(model_cfg.get("base_mean"), d)
        base_cov = _as_cov(model_cfg.get("base_cov"), d)
        u, du = pseudo_huber(1.0)
        # potential Q + product part: keep the base quadratic as Q
        target = ProductPotential(u, du, d)

        def sequence(lambdas):
            from ..model import GeometricPath
            return GeometricPath(GaussianBase(base_mean, base_cov), target,
                                 lambdas,
                                 curvature=model_cfg.get("curvature"))

        return {"d": d, "family": family, "sequence": sequence,
                "oracle": None, "curvature": model_cfg.get("curvature"),
                "base": lambda: GaussianBase(base_mean, base_cov),
                "target": lambda: target}

    raise ConfigError(f"unknown model family {family!r}")


def build_schedule(schedule_cfg, model):
    """Schedule block -> realized temperature array (lambda_0..lambda_T).

    The adaptive kind has no frozen array; callers detect it and use the
    adaptive driver instead.
    """
    from ..schedule import (default_c, equidistant_schedule,
                            geometric_schedule, linear_schedule)

    kind = schedule_cfg["kind"]
    if kind == "adaptive":
        return None
    if kind == "equidistant":
        t = schedule_cfg.get("T")
        if t is None:
            raise ConfigError("equidistant schedule needs schedule.T")
        lam = equidistant_schedule(int(t)).lambdas
    elif kind == "geometric":
        curv = model.get("curvature")
        if curv is None:
            raise ConfigError("geometric schedule needs curvature constants")
        alpha_q, alpha_v, beta_v = curv
        c = schedule_cfg.get("c", "auto")
        c = default_c(model["d"]) if c == "auto" else float(c)
        lam = geometric_schedule(alpha_q, alpha_v, beta_v, model["d"], c,
                                 lambda0=schedule_cfg.get("lambda0")).lambdas
    elif kind == "linear":
        delta = schedule_cfg.get("delta")
        if delta is None:
            raise ConfigError("linear schedule needs schedule.delta "
                              "(no endorsed default)")
        lam = linear_schedule(model["d"], float(delta)).lambdas
    else:
        raise ConfigError(f"unknown schedule kind {kind!r}")
    if schedule_cfg.get("final_stationary"):
        lam = np.concatenate([lam, [1.0]])
    return lam


def build_kernel_spec(kernel_cfg):
    from ..kernels import KernelSpec

    kind = kernel_cfg["kind"]
    if kind == "rwm":
        step = kernel_cfg.get("scale", "auto")
    elif kind == "mala":
        step = kernel_cfg.get("h", "auto")
    elif kind == "pcn":
        step = kernel_cfg.get("rho", "auto")
    elif kind == "indep_mixture":
        step = kernel_cfg.get("gamma")
        if step is None:
            raise ConfigError("indep_mixture kernel needs kernel.gamma")
    else:
        raise ConfigError(f"unknown kernel kind {kind!r}")
    precond = kernel_cfg.get("precond")
    if precond is not None and precond != "identity":
        precond = np.asarray(precond, dtype=float)
    else:
        precond = None
    return KernelSpec(kind, step, precond)
