"""Markov transition kernels leaving the current tempering target invariant.

Four kernels: random-walk Metropolis, MALA, preconditioned Crank-Nicolson,
and the analytically tractable independence mixture
``K(x, dy) = (1-gamma) delta_x(dy) + gamma pi(dy)`` whose spectral gap is
exactly gamma.

Each kernel exposes a single-step interface plus a vectorised ``run_chain``
advancing M chains at once; samplers compose P-1 steps without knowing the
kernel kind.  Chains consume randomness in a fixed per-step order (proposal
noise then acceptance uniforms) from the stream the caller supplies, so runs
are reproducible regardless of how work is scheduled.  Kernel objects are
immutable after construction.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky

from .errors import ConfigError, PathInfeasibleError, StateCorruptionError

__all__ = [
    "KernelSpec", "KernelStats", "rwm_step", "mala_step", "pcn_step",
    "indep_mixture_step", "pcn_rho_for_lambda", "make_kernel",
    "RWMKernel", "MALAKernel", "PCNKernel", "IndepMixtureKernel",
    "gaussian_proposal_logpdf", "mala_proposal_logpdf",
]

DEFAULT_RWM_SCALE_SQ = 2.38**2  # proposal covariance 2.38^2/d * C


@dataclass
class KernelSpec:
    """Kernel kind plus its single tunable.

    ``step`` is the RWM proposal scale, the MALA step h, the pCN rho, or the
    mixture refresh weight gamma; ``"auto"`` defers to the per-kind default
    (RWM: 2.38/sqrt(d); MALA: 1/(beta_V sqrt(d) max(1, kappa)); pCN: the
    gap-maximising rho(lambda)).  ``precond`` is an optional covariance used
    by RWM proposals.
    """

    kind: str
    step: object = "auto"
    precond: object = None

    def __post_init__(self):
        if self.kind not in ("rwm", "mala", "pcn", "indep_mixture"):
            raise ConfigError(f"unknown kernel kind {self.kind!r}")
        if self.step != "auto":
            s = float(self.step)
            if self.kind in ("rwm", "mala") and s <= 0:
                raise ConfigError(f"{self.kind} step must be > 0, got {s}")
            if self.kind == "pcn" and not 0.0 <= s < 1.0:
                raise ConfigError(f"pcn rho must be in [0, 1), got {s}")
            if self.kind == "indep_mixture" and not 0.0 < s <= 1.0:
                raise ConfigError(f"mixture gamma must be in (0, 1], got {s}")


@dataclass
class KernelStats:
    proposals: int = 0
    accepts: int = 0

    def add(self, proposals, accepts):
        self.proposals += int(proposals)
        self.accepts += int(accepts)
        assert self.accepts <= self.proposals

    @property
    def rate(self):
        return self.accepts / self.proposals if self.proposals else float("nan")


# ---------------------------------------------------------------------------
# Acceptance-probability pieces (shared by the steps and the balance tests)
# ---------------------------------------------------------------------------

def gaussian_proposal_logpdf(x, y, scale, chol_c=None):
    """log N(y; x, scale^2 C) for a single pair of points."""
    d = np.atleast_1d(y - x) / scale
    if chol_c is not None:
        from scipy.linalg import solve_triangular
        d = solve_triangular(chol_c, d, lower=True)
        logdet = 2.0 * np.sum(np.log(np.diag(chol_c)))
    else:
        logdet = 0.0
    k = d.size
    return (-0.5 * k * np.log(2 * np.pi) - k * np.log(scale) - 0.5 * logdet
            - 0.5 * float(d @ d))


def mala_proposal_logpdf(grad_logpi, h, x, y):
    """log q(x -> y) for the Langevin proposal N(y; x + h grad(x), 2h I)."""
    mean = np.atleast_1d(x) + h * np.atleast_1d(grad_logpi(x))
    d = np.atleast_1d(y) - mean
    k = d.size
    return -0.5 * k * np.log(4 * np.pi * h) - float(d @ d) / (4.0 * h)


def _metropolis(u, log_alpha):
    """Vectorised accept mask from uniforms and log acceptance probs."""
    with np.errstate(invalid="ignore"):
        return np.log(u) < log_alpha


# ---------------------------------------------------------------------------
# Single-step operations
# ---------------------------------------------------------------------------

def rwm_step(logpi, x, scale, rng, chol_c=None):
    """One random-walk Metropolis step with proposal N(x, scale^2 C).

    Returns ``(new_point, accepted)``; satisfies detailed balance with
    respect to exp(logpi).
    """
    if scale <= 0:
        raise ConfigError(f"rwm scale must be > 0, got {scale}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lp_x = float(logpi(x))
    if not np.isfinite(lp_x):
        raise StateCorruptionError(f"non-finite log-density at current point {x!r}")
    z = rng.standard_normal(x.size)
    y = x + scale * (z @ chol_c.T if chol_c is not None else z)
    log_alpha = min(0.0, float(logpi(y)) - lp_x)
    accepted = bool(np.log(rng.random()) < log_alpha)
    return (y if accepted else x), accepted


def mala_step(logpi, grad_logpi, x, h, rng):
    """One Metropolis-adjusted Langevin step, proposal
    x + h grad_logpi(x) + sqrt(2h) xi with exact MH correction."""
    if h <= 0:
        raise ConfigError(f"mala step size must be > 0, got {h}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g_x = np.atleast_1d(np.asarray(grad_logpi(x), dtype=float))
    if not np.all(np.isfinite(g_x)):
        raise StateCorruptionError(f"non-finite gradient at current point {x!r}")
    lp_x = float(logpi(x))
    if not np.isfinite(lp_x):
        raise StateCorruptionError(f"non-finite log-density at current point {x!r}")
    y = x + h * g_x + np.sqrt(2.0 * h) * rng.standard_normal(x.size)
    with np.errstate(invalid="ignore", over="ignore"):
        log_alpha = (float(logpi(y)) + mala_proposal_logpdf(grad_logpi, h, y, x)
                     - lp_x - mala_proposal_logpdf(grad_logpi, h, x, y))
    if not np.isfinite(log_alpha):
        log_alpha = -np.inf
    accepted = bool(np.log(rng.random()) < min(0.0, log_alpha))
    return (y if accepted else x), accepted


def pcn_step(potential, x, rho, chol_c, rng, mean=None):
    """One preconditioned Crank-Nicolson MH step.

    Proposal Y = rho x + sqrt(1-rho^2) C^(1/2) zeta, accepted with
    probability min(1, exp(potential(x) - potential(Y))); leaves
    N(mean, C) exp(-potential) invariant.
    """
    if not 0.0 <= rho < 1.0:
        raise ConfigError(f"pcn rho must be in [0, 1), got {rho}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mu = np.zeros(x.size) if mean is None else np.atleast_1d(mean)
    z = rng.standard_normal(x.size)
    y = mu + rho * (x - mu) + np.sqrt(1.0 - rho**2) * (z @ chol_c.T)
    log_alpha = min(0.0, float(potential(x)) - float(potential(y)))
    accepted = bool(np.log(rng.random()) < log_alpha)
    return (y if accepted else x), accepted


def indep_mixture_step(pi_sampler, x, gamma, rng):
    """With probability gamma return a fresh exact draw from pi, else x.

    The resulting kernel has spectral gap exactly gamma; ergodic averages of
    h have asymptotic variance Var_pi[h] (2-gamma)/gamma.
    """
    if not 0.0 < gamma <= 1.0:
        raise ConfigError(f"mixture gamma must be in (0, 1], got {gamma}")
    refresh = rng.random() < gamma
    fresh = pi_sampler(1, rng)[0]
    return fresh if refresh else np.atleast_1d(np.asarray(x, dtype=float))


def pcn_rho_for_lambda(lam, beta_v, trace_c):
    """Gap-maximising pCN correlation for the target at temperature lambda.

    With lambda_crit = 1/(2 beta_V Tr C): rho = sqrt(1 - lambda_crit/lambda)
    above the threshold and 0 below it.
    """
    if beta_v <= 0 or trace_c <= 0:
        raise ConfigError("beta_v and trace_c must be positive")
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"lambda must be in [0, 1], got {lam}")
    lam_crit = 1.0 / (2.0 * beta_v * trace_c)
    if lam <= lam_crit:
        return 0.0
    return float(np.sqrt(1.0 - lam_crit / lam))


# ---------------------------------------------------------------------------
# Vectorised kernels: M chains advance together, one row per chain
# ---------------------------------------------------------------------------

class _ChainKernel:
    """Shared chain-running logic; subclasses implement ``_step_batch``."""

    def run_chain(self, x0, n_steps, rng, keep="all"):
        """Advance M chains ``n_steps`` steps from ``x0`` of shape (M, d).

        Returns ``(path, stats)`` where path has shape (n_steps+1, M, d) when
        ``keep="all"`` (waste-free pools) or (M, d) when ``keep="last"``.
        """
        x = np.array(x0, dtype=float, copy=True)
        if x.ndim == 1:
            x = x[None, :]
        stats = KernelStats()
        keep_all = keep == "all"
        path = np.empty((n_steps + 1, *x.shape)) if keep_all else None
        if keep_all:
            path[0] = x
        state = self._chain_state(x)
        for p in range(1, n_steps + 1):
            x, state, n_acc = self._step_batch(x, state, rng)
            stats.add(x.shape[0], n_acc)
            if keep_all:
                path[p] = x
        return (path if keep_all else x), stats

    def _chain_state(self, x):
        return None


class RWMKernel(_ChainKernel):
    def __init__(self, logpi, scale, chol_c=None):
        if scale <= 0:
            raise ConfigError(f"rwm scale must be > 0, got {scale}")
        self.logpi, self.scale, self.chol_c = logpi, float(scale), chol_c

    def log_alpha(self, x, y):
        """log acceptance probability for the single pair x -> y."""
        lp = self.logpi(np.stack([np.atleast_1d(x), np.atleast_1d(y)]))
        return min(0.0, float(lp[1] - lp[0]))

    def _chain_state(self, x):
        lp = np.asarray(self.logpi(x), dtype=float)
        if not np.all(np.isfinite(lp)):
            raise StateCorruptionError("non-finite log-density at chain start")
        return lp

    def _step_batch(self, x, lp_x, rng):
        z = rng.standard_normal(x.shape)
        u = rng.random(x.shape[0])
        y = x + self.scale * (z @ self.chol_c.T if self.chol_c is not None else z)
        lp_y = np.asarray(self.logpi(y), dtype=float)
        acc = _metropolis(u, lp_y - lp_x)
        x = np.where(acc[:, None], y, x)
        lp_x = np.where(acc, lp_y, lp_x)
        return x, lp_x, int(acc.sum())


class MALAKernel(_ChainKernel):
    def __init__(self, logpi, grad_logpi, h):
        if h <= 0:
            raise ConfigError(f"mala step size must be > 0, got {h}")
        self.logpi, self.grad, self.h = logpi, grad_logpi, float(h)

    def log_alpha(self, x, y):
        """log acceptance probability for the single pair x -> y."""
        pts = np.stack([np.atleast_1d(x), np.atleast_1d(y)])
        lp = self.logpi(pts)
        g = self.grad(pts)
        h = self.h
        fwd = -np.sum((pts[1] - pts[0] - h * g[0]) ** 2) / (4.0 * h)
        bwd = -np.sum((pts[0] - pts[1] - h * g[1]) ** 2) / (4.0 * h)
        return min(0.0, float(lp[1] + bwd - lp[0] - fwd))

    def _chain_state(self, x):
        lp = np.asarray(self.logpi(x), dtype=float)
        g = np.asarray(self.grad(x), dtype=float)
        if not (np.all(np.isfinite(lp)) and np.all(np.isfinite(g))):
            raise StateCorruptionError("non-finite density or gradient at chain start")
        return lp, g

    def _step_batch(self, x, state, rng):
        lp_x, g_x = state
        h = self.h
        z = rng.standard_normal(x.shape)
        u = rng.random(x.shape[0])
        y = x + h * g_x + np.sqrt(2.0 * h) * z
        lp_y = np.asarray(self.logpi(y), dtype=float)
        g_y = np.asarray(self.grad(y), dtype=float)
        with np.errstate(invalid="ignore", over="ignore"):
            fwd = -np.sum((y - x - h * g_x) ** 2, axis=1) / (4.0 * h)
            bwd = -np.sum((x - y - h * g_y) ** 2, axis=1) / (4.0 * h)
            log_alpha = lp_y + bwd - lp_x - fwd
        log_alpha = np.where(np.isfinite(log_alpha), log_alpha, -np.inf)
        acc = _metropolis(u, log_alpha)
        x = np.where(acc[:, None], y, x)
        lp_x = np.where(acc, lp_y, lp_x)
        g_x = np.where(acc[:, None], g_y, g_x)
        return x, (lp_x, g_x), int(acc.sum())


class PCNKernel(_ChainKernel):
    def __init__(self, potential, rho, cov=None, chol_c=None, mean=None):
        if not 0.0 <= rho < 1.0:
            raise ConfigError(f"pcn rho must be in [0, 1), got {rho}")
        if chol_c is None:
            try:
                chol_c = cholesky(np.asarray(cov, dtype=float), lower=True)
            except np.linalg.LinAlgError as e:
                raise PathInfeasibleError(f"pcn covariance not positive definite: {e}")
        self.potential, self.rho, self.chol_c = potential, float(rho), chol_c
        self.mean = np.zeros(chol_c.shape[0]) if mean is None else np.asarray(mean)

    def log_alpha(self, x, y):
        """log acceptance probability for the single pair x -> y."""
        phi = self.potential(np.stack([np.atleast_1d(x), np.atleast_1d(y)]))
        return min(0.0, float(phi[0] - phi[1]))

    def _chain_state(self, x):
        return np.asarray(self.potential(x), dtype=float)

    def _step_batch(self, x, phi_x, rng):
        z = rng.standard_normal(x.shape)
        u = rng.random(x.shape[0])
        y = (self.mean + self.rho * (x - self.mean)
             + np.sqrt(1.0 - self.rho**2) * (z @ self.chol_c.T))
        phi_y = np.asarray(self.potential(y), dtype=float)
        acc = _metropolis(u, phi_x - phi_y)
        x = np.where(acc[:, None], y, x)
        phi_x = np.where(acc, phi_y, phi_x)
        return x, phi_x, int(acc.sum())


class IndepMixtureKernel(_ChainKernel):
    """Refresh-or-stay kernel; the whole chain is composed in one batch.

    Stream consumption: all refresh uniforms (n_steps, M) first, then all
    candidate draws, independent of M and of the keep mode.
    """

    def __init__(self, sampler, gamma):
        if not 0.0 < gamma <= 1.0:
            raise ConfigError(f"mixture gamma must be in (0, 1], got {gamma}")
        self.sampler, self.gamma = sampler, float(gamma)

    def run_chain(self, x0, n_steps, rng, keep="all"):
        x0 = np.array(x0, dtype=float, copy=True)
        if x0.ndim == 1:
            x0 = x0[None, :]
        m, d = x0.shape
        stats = KernelStats()
        if n_steps == 0:
            return (x0[None] if keep == "all" else x0), stats
        u = rng.random((n_steps, m))
        fresh = self.sampler(n_steps * m, rng).reshape(n_steps, m, d)
        refresh = u < self.gamma
        stats.add(n_steps * m, refresh.sum())
        # index of the most recent refresh at or before each step (-1: none yet)
        idx = np.where(refresh, np.arange(n_steps)[:, None], -1)
        last = np.maximum.accumulate(idx, axis=0)
        if keep == "all":
            path = np.empty((n_steps + 1, m, d))
            path[0] = x0
            taken = np.take_along_axis(fresh, np.maximum(last, 0)[..., None], axis=0)
            path[1:] = np.where((last >= 0)[..., None], taken, x0[None])
            return path, stats
        final_idx = last[-1]
        out = np.where((final_idx >= 0)[:, None],
                       fresh[np.maximum(final_idx, 0), np.arange(m)], x0)
        return out, stats


# ---------------------------------------------------------------------------
# Factory wiring kernels to a tempering sequence
# ---------------------------------------------------------------------------

def default_mala_h(curvature, d):
    """Step size 1/(beta_V sqrt(d) max(1, kappa_V)); acceptance-rate tuning
    beyond this default is the caller's responsibility."""
    alpha_q, alpha_v, beta_v = curvature
    kappa = beta_v / alpha_v if alpha_v > 0 else 1.0
    return 1.0 / (beta_v * np.sqrt(d) * max(1.0, kappa))


def make_kernel(spec, seq, t):
    """Build the concrete kernel for iteration t (invariant for pi_{t-1})."""
    d = seq.dim
    if spec.kind == "rwm":
        scale = (np.sqrt(DEFAULT_RWM_SCALE_SQ / d) if spec.step == "auto"
                 else float(spec.step))
        chol_c = None
        if spec.precond is not None:
            chol_c = cholesky(np.asarray(spec.precond, dtype=float), lower=True)
        return RWMKernel(lambda x: seq.log_target(t - 1, x), scale, chol_c)
    if spec.kind == "mala":
        if spec.step == "auto":
            if getattr(seq, "curvature", None) is None:
                raise ConfigError("mala step 'auto' needs curvature constants")
            h = default_mala_h(seq.curvature, d)
        else:
            h = float(spec.step)
        return MALAKernel(lambda x: seq.log_target(t - 1, x),
                          lambda x: seq.grad_log_target(t - 1, x), h)
    if spec.kind == "pcn":
        mean, chol_c, phi = seq.pcn_parts(t - 1)
        if spec.step == "auto":
            if getattr(seq, "curvature", None) is None:
                raise ConfigError("pcn rho 'auto' needs curvature constants")
            beta_v = seq.curvature[2]
            trace_c = float(np.sum(np.diag(chol_c @ chol_c.T)))
            rho = pcn_rho_for_lambda(seq.lam(t - 1), beta_v, trace_c)
        else:
            rho = float(spec.step)
        return PCNKernel(phi, rho, chol_c=chol_c, mean=mean)
    if spec.kind == "indep_mixture":
        if spec.step == "auto":
            raise ConfigError("indep_mixture requires an explicit gamma")
        return IndepMixtureKernel(lambda n, rng: seq.exact_sample(t - 1, n, rng),
                                  float(spec.step))
    raise ConfigError(f"unknown kernel kind {spec.kind!r}")
