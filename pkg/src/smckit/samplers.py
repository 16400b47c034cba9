"""Standard, waste-free and greedy waste-free SMC loops.

All three variants share one iteration skeleton: resample M ancestors from
the weighted pool, advance M Markov chains with the current kernel, reweight
the new pool by the incremental weight G_t, and accumulate
log Zhat_t = log Zhat_{t-1} + log mean(w_t).  They differ only in the pool:

* standard      -- pool = the M chain endpoints (intermediate states dropped);
* waste-free    -- pool = all N = M*P chain states, the resampled start
                   included as state p = 1;
* greedy        -- waste-free with an iteration-dependent chain length P_t.

Randomness comes from per-(seed, iteration, purpose) Philox streams (see
``rng``); chain m always consumes row m of each batched draw.  Identical
(config, seed) therefore give bit-identical records, and the greedy sampler
with constant P_t is bit-identical to the waste-free one.

Resampling is multinomial only: the estimators' lack of bias and the
finite-sample guarantees are stated for IID categorical draws.  Every
iteration resamples; there is no ESS-triggered skipping.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .errors import ConfigError, DegenerateCloudError
from .kernels import KernelSpec, make_kernel
from .model import GeometricPath, ParticleCloud
from .schedule import adaptive_ess_schedule
from .weights import log_mean_exp, normalize_log_weights, relative_ess

__all__ = [
    "RunConfig", "RunRecord", "resample_multinomial", "run_standard_smc",
    "run_wastefree_smc", "run_greedy_wastefree", "run_adaptive_wastefree",
    "run_smc",
]


@dataclass
class RunConfig:
    """One sampler run: sequence, kernel choice, sizes, seed, algorithm.

    ``kernel`` is a KernelSpec applied at every iteration, a list with one
    spec per iteration t = 1..T, or a callable t -> KernelSpec.  ``P`` is the
    chain length (standard, waste-free); greedy uses ``P_schedule`` with one
    entry per iteration t = 0..T.
    """

    seq: object
    kernel: object
    M: int
    seed: int
    algorithm: str
    P: int = None
    P_schedule: object = None

    def __post_init__(self):
        if self.algorithm not in ("standard", "wastefree", "greedy"):
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.M < 1:
            raise ConfigError(f"M must be >= 1, got {self.M}")
        if self.algorithm == "greedy":
            if self.P_schedule is None:
                raise ConfigError("greedy runs need P_schedule (P_0..P_T)")
            ps = np.asarray(self.P_schedule, dtype=int)
            if ps.size != self.seq.T + 1:
                raise ConfigError(
                    f"P_schedule has {ps.size} entries, expected T+1={self.seq.T + 1}")
            if np.any(ps < 1):
                raise ConfigError("every P_t must be >= 1")
            self.P_schedule = ps
        else:
            if self.P is None or self.P < 1:
                raise ConfigError("P must be >= 1")
            self.P = int(self.P)

    def kernel_spec(self, t):
        if isinstance(self.kernel, KernelSpec):
            return self.kernel
        if callable(self.kernel):
            return self.kernel(t)
        return self.kernel[t - 1]


@dataclass
class RunRecord:
    """Everything a finished run exposes: per-iteration log Zhat increments
    (log pi_{t-1}(G_t) estimates), relative ESS, acceptance rates, realized
    temperatures and chain lengths, the final pool, and the running log Zhat."""

    algorithm: str
    M: int
    seed: int
    chain_lengths: np.ndarray
    log_increments: np.ndarray
    rel_ess: np.ndarray
    acc_rates: np.ndarray
    lambdas: object
    logZ: float
    final: ParticleCloud
    markov_steps: int
    warnings: list = field(default_factory=list)

    @property
    def T(self):
        return self.log_increments.size - 1

    def ratios(self):
        """Linear-space per-iteration ratio estimates pi_{t-1}(G_t)."""
        return np.exp(self.log_increments)

    def fingerprint(self):
        """Stable digest of the run output, for bit-identity assertions."""
        h = hashlib.sha256()
        for arr in (self.log_increments, self.rel_ess,
                    np.asarray(self.chain_lengths, dtype=np.int64),
                    self.final.positions, self.final.log_weights):
            h.update(np.ascontiguousarray(arr).tobytes())
        if self.lambdas is not None:
            h.update(np.ascontiguousarray(self.lambdas).tobytes())
        return h.hexdigest()


def resample_multinomial(norm_weights, m, rng):
    """M IID ancestor draws from Cat(norm_weights).

    Weights must be nonnegative and sum to 1 within 1e-8; an all-zero vector
    raises DegenerateCloudError.  Deterministic given the generator state.
    """
    w = np.asarray(norm_weights, dtype=float)
    if np.any(w < 0) or np.any(~np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    s = w.sum()
    if s == 0.0:
        raise DegenerateCloudError(-1, "all resampling weights are zero")
    if abs(s - 1.0) > 1e-8:
        raise ValueError(f"weights must sum to 1, got {s}")
    cdf = np.cumsum(w)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(m), side="right").astype(np.int64)


def _realized_lambdas(seq):
    lam = getattr(seq, "lambdas", None)
    return np.array(lam, dtype=float) if lam is not None else None


def _weight_pool(seq, t, pool):
    logw = seq.log_incremental_weight(t, pool)
    if np.max(logw) == -np.inf:
        raise DegenerateCloudError(t)
    return logw


def _finish(algorithm, cfg_m, seed, p_lengths, increments, ress, accs, lambdas,
            cloud, steps, warnings=None):
    inc = np.asarray(increments, dtype=float)
    return RunRecord(
        algorithm=algorithm, M=cfg_m, seed=seed,
        chain_lengths=np.asarray(p_lengths, dtype=np.int64),
        log_increments=inc,
        rel_ess=np.asarray(ress, dtype=float),
        acc_rates=np.asarray(accs, dtype=float),
        lambdas=lambdas, logZ=float(np.sum(inc)), final=cloud,
        markov_steps=int(steps), warnings=warnings or [])


def run_standard_smc(cfg):
    """Standard SMC: M particles, P-1 kernel steps per iteration,
    intermediate chain states discarded."""
    if cfg.algorithm != "standard":
        raise ConfigError("run_standard_smc needs algorithm='standard'")
    seq, m, p, seed = cfg.seq, cfg.M, cfg.P, cfg.seed
    x = seq.sample_base(m, rngmod.stream(seed, 0, "init"))
    logw = _weight_pool(seq, 0, x)
    increments = [log_mean_exp(logw)]
    ress, accs = [relative_ess(logw)], [np.nan]
    steps = 0
    for t in range(1, seq.T + 1):
        ancestors = resample_multinomial(normalize_log_weights(logw, t - 1), m,
                                         rngmod.stream(seed, t, "resample"))
        kernel = make_kernel(cfg.kernel_spec(t), seq, t)
        x, stats = kernel.run_chain(x[ancestors], p - 1,
                                    rngmod.stream(seed, t, "kernel"), keep="last")
        steps += m * (p - 1)
        logw = _weight_pool(seq, t, x)
        increments.append(log_mean_exp(logw))
        ress.append(relative_ess(logw))
        accs.append(stats.rate)
    cloud = ParticleCloud(seq.T, x, logw, ("flat", m))
    return _finish("standard", m, seed, [p] * (seq.T + 1), increments, ress,
                   accs, _realized_lambdas(seq), cloud, steps)


def _run_wastefree_body(seq, kernel_spec_for, m, p_schedule, seed, algorithm):
    p0 = int(p_schedule[0])
    pool = seq.sample_base(m * p0, rngmod.stream(seed, 0, "init"))
    logw = _weight_pool(seq, 0, pool)
    increments = [log_mean_exp(logw)]
    ress, accs = [relative_ess(logw)], [np.nan]
    steps = 0
    p_t = p0
    for t in range(1, seq.T + 1):
        p_t = int(p_schedule[t])
        ancestors = resample_multinomial(normalize_log_weights(logw, t - 1), m,
                                         rngmod.stream(seed, t, "resample"))
        kernel = make_kernel(kernel_spec_for(t), seq, t)
        path, stats = kernel.run_chain(pool[ancestors], p_t - 1,
                                       rngmod.stream(seed, t, "kernel"), keep="all")
        steps += m * (p_t - 1)
        # gather chain-major: pool index n = m * P_t + (p - 1)
        pool = path.transpose(1, 0, 2).reshape(m * p_t, seq.dim)
        logw = _weight_pool(seq, t, pool)
        increments.append(log_mean_exp(logw))
        ress.append(relative_ess(logw))
        accs.append(stats.rate)
    cloud = ParticleCloud(seq.T, pool, logw, ("chains", m, p_t))
    return _finish(algorithm, m, seed, list(p_schedule), increments, ress,
                   accs, _realized_lambdas(seq), cloud, steps)


def run_wastefree_smc(cfg):
    """Waste-free SMC: all N = M*P chain states enter the weighting pool."""
    if cfg.algorithm != "wastefree":
        raise ConfigError("run_wastefree_smc needs algorithm='wastefree'")
    return _run_wastefree_body(cfg.seq, cfg.kernel_spec, cfg.M,
                               [cfg.P] * (cfg.seq.T + 1), cfg.seed, "wastefree")


def run_greedy_wastefree(cfg):
    """Greedy waste-free SMC: the waste-free loop with per-iteration P_t."""
    if cfg.algorithm != "greedy":
        raise ConfigError("run_greedy_wastefree needs algorithm='greedy'")
    return _run_wastefree_body(cfg.seq, cfg.kernel_spec, cfg.M,
                               cfg.P_schedule, cfg.seed, "greedy")


def run_smc(cfg):
    """Dispatch on cfg.algorithm."""
    return {"standard": run_standard_smc,
            "wastefree": run_wastefree_smc,
            "greedy": run_greedy_wastefree}[cfg.algorithm](cfg)


# ---------------------------------------------------------------------------
# ESS-adaptive tempering driver
# ---------------------------------------------------------------------------

class _GrowingPath(GeometricPath):
    """Geometric path whose temperature list is extended while running."""

    def __init__(self, base, target, curvature=None, exact_sampler=None):
        super().__init__(base, target, [0.0], curvature, exact_sampler)
        self._lam = []  # lambda_0, lambda_1, ... as they are chosen

    def push(self, lam):
        self._lam.append(float(lam))

    def lam(self, s):
        return 0.0 if s < 0 else self._lam[s]

    @property
    def realized(self):
        return np.array(self._lam, dtype=float)


def run_adaptive_wastefree(base, target, kernel_spec, m, p, seed, target_ress,
                           delta_min=1e-6, curvature=None, exact_sampler=None,
                           trailing_stationary=False, max_T=10000):
    """Waste-free SMC with temperatures chosen on the fly so each
    reweighting keeps the relative ESS at ``target_ress``.

    ``trailing_stationary`` appends one final iteration at lambda = 1 (unit
    incremental weights) so the last unweighted pool targets the terminal
    distribution.  The realized temperatures are stored in the record.
    """
    path = _GrowingPath(base, target, curvature, exact_sampler)
    pool = path.sample_base(m * p, rngmod.stream(seed, 0, "init"))
    warnings = []

    def choose(t, positions):
        lam, warned = adaptive_ess_schedule(path.V(positions), path.lam(t - 1),
                                            target_ress, delta_min=delta_min)
        if warned:
            warnings.append({"t": t, "event": "ess_floor",
                             "detail": f"minimal step {delta_min} taken"})
        path.push(lam)
        return lam

    lam_t = choose(0, pool)
    logw = -(lam_t - 0.0) * path.V(pool)
    increments = [log_mean_exp(logw)]
    ress, accs, p_lengths = [relative_ess(logw)], [np.nan], [p]
    steps, t = 0, 0
    while t < max_T:
        reached_one = path.lam(t) >= 1.0
        if reached_one and not trailing_stationary:
            break
        t += 1
        ancestors = resample_multinomial(normalize_log_weights(logw, t - 1), m,
                                         rngmod.stream(seed, t, "resample"))
        kernel = make_kernel(kernel_spec, path, t)
        chains, stats = kernel.run_chain(pool[ancestors], p - 1,
                                         rngmod.stream(seed, t, "kernel"), keep="all")
        steps += m * (p - 1)
        pool = chains.transpose(1, 0, 2).reshape(m * p, path.dim)
        if reached_one:
            path.push(1.0)
            logw = np.zeros(pool.shape[0])
        else:
            lam_prev = path.lam(t - 1)
            lam_t = choose(t, pool)
            logw = -(lam_t - lam_prev) * path.V(pool)
        if np.max(logw) == -np.inf:
            raise DegenerateCloudError(t)
        increments.append(log_mean_exp(logw))
        ress.append(relative_ess(logw))
        accs.append(stats.rate)
        p_lengths.append(p)
        if reached_one:
            break
    else:
        raise ConfigError(f"adaptive run exceeded max_T={max_T} iterations")
    cloud = ParticleCloud(t, pool, logw, ("chains", m, p))
    return _finish("wastefree", m, seed, p_lengths, increments, ress, accs,
                   path.realized, cloud, steps, warnings)
