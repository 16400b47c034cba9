"""Experiment orchestration: replicate grids, figure protocols, planning.

Every experiment reduces to a deterministic task list.  Tasks execute in a
worker pool (``threads``) but results are assembled in grid order, so output
files are byte-stable for a fixed resolved config regardless of scheduling.
Per-replicate failures become error rows; nothing is silently dropped.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .. import rng as rngmod
from ..errors import ConfigError, SMCError
from ..estimators import (moment_estimate, z_product_of_means,
                          z_product_of_medians)
from ..planner import (PlanInput, plan_greedy_moments, plan_medians_z,
                       plan_standard_moments, plan_standard_z,
                       plan_wastefree_moments, plan_wastefree_z)
from ..samplers import RunConfig, run_adaptive_wastefree, run_smc
from .config import (build_kernel_spec, build_model, build_schedule,
                     config_hash, resolve)
from .writers import (ResultRow, diagnostics_from_record, write_diagnostics,
                      write_manifest, write_results)

_PLANNERS = {
    "standard_moments": plan_standard_moments,
    "wastefree_moments": plan_wastefree_moments,
    "greedy_moments": plan_greedy_moments,
    "wastefree_z": plan_wastefree_z,
    "medians_z": plan_medians_z,
    "standard_z": plan_standard_z,
}


# ---------------------------------------------------------------------------
# Task execution
# ---------------------------------------------------------------------------

def _execute_task(task):
    """Run one replicate (J sub-runs when medians are requested) and return
    (rows, diagnostics).  Sampler errors become a single error row."""
    t0 = time.perf_counter()
    base_row = dict(config_hash=task["config_hash"],
                    experiment=task["experiment"], grid_id=task["grid_id"],
                    seed=task["seeds"][0], algorithm=task["algorithm"],
                    arm=task.get("arm", ""), d=task.get("d"),
                    C=task.get("C"), diag_id=task["grid_id"])
    try:
        records = [task["runner"](seed) for seed in task["seeds"]]
    except SMCError as err:
        row = ResultRow(estimator="", status=f"error:{type(err).__name__}",
                        wall_time_s=time.perf_counter() - t0, **base_row)
        return [row], [{"diag_id": task["grid_id"], "error": str(err)}]

    steps = sum(rec.markov_steps for rec in records)
    elapsed = time.perf_counter() - t0
    rows = []
    if "log_z" in task["estimands"]:
        ref = task.get("log_z_ref")
        if len(records) == 1:
            est = z_product_of_means(records[0])
            kind = "log_z_means"
        else:
            est = z_product_of_medians(records=records)
            kind = "log_z_medians"
        rel = (abs(np.expm1(est.log_value - ref)) if ref is not None else None)
        rows.append(ResultRow(
            estimator=kind, value=est.log_value, reference=ref, rel_error=rel,
            markov_steps=steps, wall_time_s=elapsed, **base_row))
    if "moment" in task["estimands"] and len(records) == 1:
        ref_mean = task.get("moment_ref")
        est = moment_estimate(records[0].final, lambda x: x)
        for comp, val in enumerate(np.atleast_1d(est)):
            ref = None if ref_mean is None else float(ref_mean[comp])
            rows.append(ResultRow(
                estimator=f"moment{comp}", value=float(val), reference=ref,
                error=None if ref is None else float(val) - ref,
                markov_steps=steps, wall_time_s=elapsed, **base_row))
    diag = {"diag_id": task["grid_id"],
            "runs": [diagnostics_from_record(rec) for rec in records]}
    return rows, [diag]


def _make_runner(seq, kernel_spec, algorithm, m, p=None, p_schedule=None):
    def runner(seed):
        cfg = RunConfig(seq=seq, kernel=kernel_spec, M=m, seed=seed,
                        algorithm=algorithm, P=p, P_schedule=p_schedule)
        return run_smc(cfg)

    return runner


def _make_adaptive_runner(model, kernel_spec, m, p, schedule_cfg):
    base, target = model["base"](), model["target"]()
    if kernel_spec.kind == "indep_mixture":
        raise ConfigError("adaptive schedules have no frozen temperatures, "
                          "so exact-sampler kernels are unavailable")

    def runner(seed):
        return run_adaptive_wastefree(
            base, target, kernel_spec, m=m, p=p, seed=seed,
            target_ress=schedule_cfg["target_ress"],
            delta_min=schedule_cfg["delta_min"],
            curvature=model.get("curvature"),
            trailing_stationary=schedule_cfg.get("final_stationary", False))

    return runner


def _run_tasks(tasks, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_execute_task, tasks))
    else:
        outcomes = [_execute_task(t) for t in tasks]
    rows, diags = [], []
    for r, d in outcomes:
        rows.extend(r)
        diags.extend(d)
    return rows, diags


# ---------------------------------------------------------------------------
# Experiment builders
# ---------------------------------------------------------------------------

def _single_run_tasks(resolved, chash):
    model = build_model(resolved["model"])
    schedule_cfg = resolved["schedule"]
    kernel_spec = build_kernel_spec(resolved["kernel"])
    algo = resolved["algorithm"]
    rep = resolved["replication"]
    estimands = resolved["estimands"]
    adaptive = schedule_cfg["kind"] == "adaptive"

    lambdas = None
    log_z_ref = moment_ref = None
    if adaptive:
        if algo["name"] != "wastefree":
            raise ConfigError("adaptive schedules require the waste-free "
                              "algorithm")
        if algo.get("P") is None:
            raise ConfigError("algorithm.P is required")
        runner_for = lambda: _make_adaptive_runner(
            model, kernel_spec, algo["M"], algo["P"], schedule_cfg)
    else:
        lambdas = build_schedule(schedule_cfg, model)
        seq = model["sequence"](lambdas)
        if model.get("oracle") is not None:
            orc = model["oracle"](lambdas)
            log_z_ref = orc.log_Z(seq.T)
            moment_ref = orc.mean(seq.T - 1) if seq.T >= 1 else orc.mean(-1)
        elif model.get("target_mean") is not None and lambdas[-1] == 1.0:
            moment_ref = np.asarray(model["target_mean"])

        if algo["name"] == "greedy":
            p_sched = algo.get("P_schedule")
            if p_sched is None:
                raise ConfigError("greedy algorithm needs algorithm.P_schedule")
            runner_for = lambda: _make_runner(seq, kernel_spec, "greedy",
                                              algo["M"], p_schedule=p_sched)
        else:
            if algo.get("P") is None:
                raise ConfigError("algorithm.P is required")
            runner_for = lambda: _make_runner(seq, kernel_spec, algo["name"],
                                              algo["M"], p=algo["P"])

    runner = runner_for()
    j = algo.get("J", 1)
    tasks = []
    for r in range(rep["n_seeds"]):
        seeds = [rngmod.derive_run_seed(rep["master_seed"], r, jj)
                 for jj in range(j)]
        tasks.append({
            "config_hash": chash, "experiment": resolved["experiment"],
            "grid_id": r, "seeds": seeds, "algorithm": algo["name"],
            "d": model["d"], "estimands": estimands, "runner": runner,
            "log_z_ref": log_z_ref, "moment_ref": moment_ref,
        })
    extra = {"lambdas": None if lambdas is None else list(lambdas)}
    return tasks, extra


FIG1_DESK = {"C_values": [1, 4, 16, 64, 400], "budget": 600, "T": 8,
             "M": 8, "n_seeds": 2000}
FIG1_TARGET = {"weights": [0.5, 0.5], "means": [[-2.0, -2.0], [3.0, 3.0]],
               "covs": [1.0, 1.0]}


def fig1_protocol(resolved, paper_scale=False):
    """Greedy waste-free runs on the bimodal 2-d mixture under a fixed
    budget split P_final = C * P, (T-1) P + C P = budget.

    Returns (tasks, manifest_extra).  The moment reference is the analytic
    mixture mean; runs across C share replicate seeds so comparisons pair up.
    """
    knobs = dict(FIG1_DESK)
    knobs.update(resolved.get("fig1", {}))
    if paper_scale:
        knobs["n_seeds"] = 40000
    t_iters = int(knobs["T"])
    if t_iters < 2:
        raise ConfigError("fig1 needs at least 2 kernel iterations")
    model = build_model({"family": "mixture", "d": 2,
                         "mixture": FIG1_TARGET})
    # temper to 1 by iteration T-1, then one stationary iteration whose
    # chain length carries the C-fold final allocation
    ramp = (np.arange(t_iters) + 1.0) / t_iters
    lambdas = np.concatenate([ramp, [1.0]])
    seq = model["sequence"](lambdas)
    kernel_spec = build_kernel_spec(resolved["kernel"])
    master = resolved["replication"]["master_seed"]
    moment_ref = model["target_mean"]

    chash = config_hash({"fig1": knobs, "kernel": resolved["kernel"],
                         "master_seed": master})
    tasks, splits = [], []
    grid_id = 0
    for c in knobs["C_values"]:
        p = int(knobs["budget"]) // (t_iters - 1 + int(c))
        if p < 1:
            raise ConfigError(f"budget {knobs['budget']} cannot fit C={c}")
        p_sched = [p] * t_iters + [int(c) * p]
        splits.append({"C": int(c), "P": p, "P_final": int(c) * p,
                       "realized_budget": (t_iters - 1) * p + int(c) * p})
        runner = _make_runner(seq, kernel_spec, "greedy", int(knobs["M"]),
                              p_schedule=p_sched)
        for r in range(int(knobs["n_seeds"])):
            tasks.append({
                "config_hash": chash, "experiment": "fig1",
                "grid_id": grid_id, "arm": "greedy-mixture",
                "seeds": [rngmod.derive_run_seed(master, r)],
                "algorithm": "greedy", "d": 2, "C": float(c),
                "estimands": ["moment"], "runner": runner,
                "moment_ref": moment_ref,
            })
            grid_id += 1
    extra = {"fig1": knobs, "budget_splits": splits,
             "lambdas": list(lambdas), "paper_scale": paper_scale}
    return tasks, extra


FIG2_DESK = {"dims": [4, 16], "n_draws": 50, "J": 10, "M_wf": 20,
             "T_scale": 2.0, "gamma_scale": 1.0, "p_scale_wf": 1.0,
             "m_scale_std": 2.0, "p_scale_std": 2.0, "heavy_factor": 2.0,
             "arms": ["wf-heavy", "wf-light", "std-heavy", "std-light"]}


def fig2_protocol(resolved, paper_scale=False):
    """Product-of-means vs product-of-medians at matched Markov-step budget.

    Arms: {waste-free, standard} x {heavy tails (target cov = f * base cov),
    light tails (/f)} over a dimension sweep, equidistant temperatures with
    T = round(T_scale sqrt(d)), RWM with the 2.38^2/d proposal covariance and
    the gap proxy gamma = gamma_scale/d.  Each replicate produces one
    product-of-medians draw (J runs) and one budget-matched product-of-means
    draw (a single run with J-fold chain length for waste-free, J-fold
    particle count for standard)."""
    knobs = dict(FIG2_DESK)
    knobs.update(resolved.get("fig2", {}))
    if paper_scale:
        knobs["n_draws"] = 200
    master = resolved["replication"]["master_seed"]
    kernel_spec = build_kernel_spec(resolved["kernel"])
    j = int(knobs["J"])
    chash = config_hash({"fig2": knobs, "kernel": resolved["kernel"],
                         "master_seed": master})

    tasks, budget_notes = [], []
    grid_id = 0
    for d_idx, d in enumerate(knobs["dims"]):
        d = int(d)
        t_iters = max(1, round(knobs["T_scale"] * np.sqrt(d)))
        gamma = knobs["gamma_scale"] / d
        lambdas = (np.arange(t_iters + 1) + 1.0) / (t_iters + 1.0)
        for arm_idx, arm in enumerate(knobs["arms"]):
            algo_kind, tail = arm.split("-")
            factor = knobs["heavy_factor"]
            cov = factor if tail == "heavy" else 1.0 / factor
            model = build_model({"family": "gaussian_pair", "d": d,
                                 "target_mean": [0.5] * d, "target_cov": cov})
            seq = model["sequence"](lambdas)
            log_z_ref = model["oracle"](lambdas).log_Z(seq.T)
            if algo_kind == "wf":
                m = int(knobs["M_wf"])
                p = max(2, int(round(knobs["p_scale_wf"] * t_iters**2 / gamma)))
                med_runner = _make_runner(seq, kernel_spec, "wastefree", m, p=p)
                mean_runner = _make_runner(seq, kernel_spec, "wastefree", m,
                                           p=j * p)
                med_cost, mean_cost = j * t_iters * m * p, t_iters * m * j * p
                sizes = {"M": m, "P": p, "P_means": j * p}
            else:
                m = max(2, int(round(knobs["m_scale_std"] * t_iters**2)))
                p = max(2, int(round(knobs["p_scale_std"] / gamma)))
                med_runner = _make_runner(seq, kernel_spec, "standard", m, p=p)
                mean_runner = _make_runner(seq, kernel_spec, "standard",
                                           j * m, p=p)
                med_cost, mean_cost = j * t_iters * m * p, t_iters * j * m * p
                sizes = {"M": m, "P": p, "M_means": j * m}
            assert med_cost == mean_cost
            budget_notes.append({"d": d, "arm": arm, "T": t_iters,
                                 "gamma": gamma, "budget": med_cost, **sizes})
            for rep in range(int(knobs["n_draws"])):
                # sub-run index j feeds the medians; index J is the matched
                # means draw, so no stream is shared between the two
                med_seeds = [rngmod.derive_run_seed(master, d_idx, arm_idx,
                                                    rep, jj)
                             for jj in range(j)]
                mean_seed = rngmod.derive_run_seed(master, d_idx, arm_idx,
                                                   rep, j)
                tasks.append({
                    "config_hash": chash, "experiment": "fig2",
                    "grid_id": grid_id, "arm": arm, "d": d,
                    "seeds": med_seeds, "algorithm": algo_kind,
                    "estimands": ["log_z"], "runner": med_runner,
                    "log_z_ref": log_z_ref})
                grid_id += 1
                tasks.append({
                    "config_hash": chash, "experiment": "fig2",
                    "grid_id": grid_id, "arm": arm, "d": d,
                    "seeds": [mean_seed], "algorithm": algo_kind,
                    "estimands": ["log_z"], "runner": mean_runner,
                    "log_z_ref": log_z_ref})
                grid_id += 1
    extra = {"fig2": knobs, "budget_matching": budget_notes,
             "paper_scale": paper_scale}
    return tasks, extra


def _sweep_tasks(resolved, chash):
    import itertools
    import json as _json

    params = resolved["sweep"]["parameters"]
    paths = sorted(params)
    combos = list(itertools.product(*(params[p] for p in paths)))
    tasks, manifest_grid = [], []
    grid_offset = 0
    for combo in combos:
        sub = _json.loads(_json.dumps(resolved))
        for path, value in zip(paths, combo):
            node = sub
            *heads, last = path.split(".")
            for head in heads:
                node = node.setdefault(head, {})
            node[last] = value
        sub["experiment"] = "single_run"
        sub_tasks, _ = _single_run_tasks(sub, chash)
        for task in sub_tasks:
            task["experiment"] = "sweep"
            task["grid_id"] += grid_offset
            task["arm"] = ";".join(f"{p}={v}" for p, v in zip(paths, combo))
        grid_offset += len(sub_tasks)
        manifest_grid.append(dict(zip(paths, combo)))
        tasks.extend(sub_tasks)
    return tasks, {"sweep_grid": manifest_grid}


def plan_rows(resolved):
    """PlanResult rows for the config's planner grid (JSON-ready dicts)."""
    block = resolved["planner"]
    theorems = block["theorem"]
    if isinstance(theorems, str):
        theorems = [theorems]
    grid_keys = [k for k in ("epsilon", "eta", "T", "M", "gamma",
                             "chi_bar_sq") if k in block]
    lists = {k: (block[k] if isinstance(block[k], list) else [block[k]])
             for k in grid_keys}
    import itertools
    rows = []
    for theorem in theorems:
        planner = _PLANNERS.get(theorem)
        if planner is None:
            raise ConfigError(f"unknown planner theorem {theorem!r}; "
                              f"choose from {sorted(_PLANNERS)}")
        for combo in itertools.product(*(lists[k] for k in grid_keys)):
            kwargs = dict(zip(grid_keys, combo))
            extra = {}
            if theorem == "standard_z":
                extra["medians"] = bool(block.get("medians", False))
                if "standard_z_constant" in block:
                    extra["standard_z_constant"] = block["standard_z_constant"]
            res = planner(PlanInput(**kwargs), **extra)
            rows.append({
                "theorem": res.formula_tag, "fidelity": res.fidelity,
                "inputs": kwargs, "M": res.M, "P": res.P,
                "P_array": None if res.P_array is None else res.P_array.tolist(),
                "J": res.J, "predicted_cost": res.predicted_cost,
                "notes": res.notes,
            })
    return rows


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def run_experiment(cfg, out_dir=None, threads=1, paper_scale=False,
                   master_seed=None):
    """Execute the configured experiment and write results.csv,
    diagnostics.jsonl and manifest.json into ``out_dir``.

    Returns the output directory path.
    """
    resolved = resolve(cfg)
    if master_seed is not None:
        resolved["replication"]["master_seed"] = int(master_seed)
    out = Path(out_dir or resolved["output"]["directory"])
    out.mkdir(parents=True, exist_ok=True)
    chash = config_hash(resolved)
    experiment = resolved["experiment"]

    manifest = {
        "experiment": experiment,
        "resolved_config": resolved,
        "config_hash": chash,
        "versions": _versions(),
    }

    if experiment == "plan":
        rows = plan_rows(resolved)
        with open(out / "plan.jsonl", "w") as fh:
            import json as _json
            for row in rows:
                fh.write(_json.dumps(row, sort_keys=True) + "\n")
        manifest["n_plans"] = len(rows)
        write_manifest(out / "manifest.json", manifest)
        return out

    if experiment == "single_run":
        tasks, extra = _single_run_tasks(resolved, chash)
    elif experiment == "fig1":
        tasks, extra = fig1_protocol(resolved, paper_scale)
    elif experiment == "fig2":
        tasks, extra = fig2_protocol(resolved, paper_scale)
    elif experiment == "sweep":
        tasks, extra = _sweep_tasks(resolved, chash)
    else:  # pragma: no cover - validate() already rejects
        raise ConfigError(f"unknown experiment {experiment!r}")

    rows, diags = _run_tasks(tasks, threads)
    manifest.update(extra)
    manifest["n_tasks"] = len(tasks)
    manifest["n_rows"] = len(rows)
    write_results(out / "results.csv", rows)
    write_diagnostics(out / "diagnostics.jsonl", diags)
    write_manifest(out / "manifest.json", manifest)
    return out


def _versions():
    import scipy

    from .. import __version__
    return {"smckit": __version__, "numpy": np.__version__,
            "scipy": scipy.__version__}
