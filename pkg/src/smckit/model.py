"""Target sequences, incremental weights, and the analytic Gaussian oracle.

A bridging family pi_0..pi_T is represented by unnormalised log-densities
``log g_t`` with respect to a normalised base measure nu.  The incremental
weight is ``G_t = g_t / g_{t-1}`` (``G_0 = g_0`` relative to nu), and the
running product of mean weights estimates ``Z_t``, the integral of ``g_t``
against nu, with the convention ``pi_{-1} = nu`` and ``Z_{-1} = 1``.

Geometric tempering interpolates a base ``q propto exp(-Q)`` and a target
``pi propto exp(-U)`` through ``pi_lambda propto q * exp(-lambda V)`` with
``V = U - Q`` built from the *bare* potentials (no normalising constants), so

    Z_t = int exp(-(Q + lambda_t V)) dx / int exp(-Q) dx.

With that convention Z depends only on potential shapes: a path from N(0,I)
to an unnormalised Gaussian shape of variance sigma^2 in d=1 has
Z_T = sigma, and identical base/target give Z_t = 1 for every t.

All density evaluations are vectorised over an ``(n, d)`` array of points and
stay in log space.  Evaluators are pure; nothing here holds mutable state, so
concurrent use from many workers is safe.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular

from .errors import NonFiniteDensityError, PathInfeasibleError
from .weights import normalize_log_weights, relative_ess

__all__ = [
    "TemperedSequence", "GeometricPath", "GaussianBase", "GaussianPotential",
    "MixturePotential", "ProductPotential", "pseudo_huber", "GaussianOracle",
    "ParticleCloud", "log_incremental_weight", "oracle_log_Z", "oracle_chi2",
]


def _as_points(x, dim):
    """Coerce a single point or an (n, d) batch to (n, d)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, dim)
    return x


def _check_increment(t, x, logg):
    """Reject NaN/+inf increments.  -inf is a legitimate zero weight (point
    outside the target's support); corruption is anything non-computable."""
    bad = np.isnan(logg) | (logg == np.inf)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise NonFiniteDensityError(t, np.asarray(x)[idx], what="incremental weight")
    return logg


class TemperedSequence:
    """Generic bridging family from user-supplied log-density callables.

    Parameters
    ----------
    T : int
        Final iteration index; targets are pi_0..pi_T.
    log_g : callable
        ``log_g(t, x)`` with ``x`` of shape (n, d) returning shape (n,);
        the unnormalised log-density of pi_t.
    log_base : callable
        Normalised log-density of the dominating measure nu.
    dim : int
    sample_base : callable
        ``sample_base(n, rng) -> (n, d)`` draws from nu.
    grad_log_g : callable, optional
        ``grad_log_g(t, x) -> (n, d)``, needed only for MALA kernels.
    """

    def __init__(self, T, log_g, log_base, dim, sample_base, grad_log_g=None):
        if T < 0:
            raise ValueError("T must be >= 0")
        self.T = int(T)
        self.dim = int(dim)
        self._log_g = log_g
        self._log_base = log_base
        self._sample_base = sample_base
        self._grad_log_g = grad_log_g

    def sample_base(self, n, rng):
        return self._sample_base(n, rng)

    def log_target(self, s, x):
        """Unnormalised log-density of pi_s, with pi_{-1} = nu."""
        x = _as_points(x, self.dim)
        if s < 0:
            return np.asarray(self._log_base(x), dtype=float)
        return np.asarray(self._log_g(s, x), dtype=float)

    def grad_log_target(self, s, x):
        if self._grad_log_g is None:
            raise NotImplementedError("sequence has no gradient information")
        return np.asarray(self._grad_log_g(s, _as_points(x, self.dim)), dtype=float)

    def log_incremental_weight(self, t, x):
        """log G_t(x); G_0 is relative to the normalised base."""
        if not 0 <= t <= self.T:
            raise ValueError(f"iteration t={t} outside 0..{self.T}")
        x = _as_points(x, self.dim)
        prev = self.log_target(t - 1, x)
        cur = self.log_target(t, x)
        return _check_increment(t, x, cur - prev)


# ---------------------------------------------------------------------------
# Base distributions and target potentials for geometric tempering
# ---------------------------------------------------------------------------

class GaussianBase:
    """Normalised Gaussian base q = N(mean, cov) with bare potential
    Q(x) = (x-mean)' cov^{-1} (x-mean) / 2."""

    def __init__(self, mean, cov):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.dim = self.mean.size
        cov = np.asarray(cov, dtype=float)
        if cov.ndim == 0:
            cov = float(cov) * np.eye(self.dim)
        self.cov = cov
        try:
            self.chol_cov = cholesky(cov, lower=True)
        except np.linalg.LinAlgError as e:  # pragma: no cover
            raise PathInfeasibleError(f"base covariance not positive definite: {e}")
        self._cho = cho_factor(cov, lower=True)
        self._log_norm = (-0.5 * self.dim * np.log(2 * np.pi)
                          - np.sum(np.log(np.diag(self.chol_cov))))

    def potential(self, x):
        d = x - self.mean
        return 0.5 * np.einsum("ni,ni->n", d, cho_solve(self._cho, d.T).T)

    def grad_potential(self, x):
        return cho_solve(self._cho, (x - self.mean).T).T

    def logpdf(self, x):
        return self._log_norm - self.potential(x)

    def sample(self, n, rng):
        z = rng.standard_normal((n, self.dim))
        return self.mean + z @ self.chol_cov.T


class GaussianPotential:
    """Bare Gaussian target potential U(x) = (x-mean)' cov^{-1} (x-mean) / 2."""

    def __init__(self, mean, cov):
        self._g = GaussianBase(mean, cov)

    def potential(self, x):
        return self._g.potential(x)

    def grad(self, x):
        return self._g.grad_potential(x)


class MixturePotential:
    """Potential of a normalised Gaussian mixture, U = -log sum_k w_k N_k."""

    def __init__(self, weights, means, covs):
        self.weights = np.asarray(weights, dtype=float)
        self.weights = self.weights / self.weights.sum()
        self.comps = [GaussianBase(m, c) for m, c in zip(means, covs)]
        self.dim = self.comps[0].dim

    def _component_logpdfs(self, x):
        return np.stack([np.log(w) + c.logpdf(x)
                         for w, c in zip(self.weights, self.comps)], axis=0)

    def potential(self, x):
        lp = self._component_logpdfs(x)
        m = np.max(lp, axis=0)
        return -(m + np.log(np.sum(np.exp(lp - m), axis=0)))

    def grad(self, x):
        lp = self._component_logpdfs(x)
        m = np.max(lp, axis=0)
        resp = np.exp(lp - m)
        resp /= np.sum(resp, axis=0)
        grads = np.stack([c.grad_potential(x) for c in self.comps], axis=0)
        return np.einsum("kn,knd->nd", resp, grads)

    def mean(self):
        return np.einsum("k,kd->d", self.weights, np.stack([c.mean for c in self.comps]))


class ProductPotential:
    """Separable potential U(x) = sum_i u(x_i), the product-form test family."""

    def __init__(self, u, du, dim):
        self.u, self.du, self.dim = u, du, dim

    def potential(self, x):
        return np.sum(self.u(x), axis=-1)

    def grad(self, x):
        return self.du(x)


def pseudo_huber(delta=1.0):
    """1-d pseudo-Huber pieces (u, u'): convex, 1/delta-smooth, linear tails."""
    def u(z):
        return delta**2 * (np.sqrt(1.0 + (z / delta) ** 2) - 1.0)

    def du(z):
        return z / np.sqrt(1.0 + (z / delta) ** 2)

    return u, du


class GeometricPath:
    """Tempering family pi_lambda propto base * exp(-lambda V), V = U - Q.

    Parameters
    ----------
    base : GaussianBase (or object with potential/logpdf/sample/dim)
    target : object with ``potential`` and optionally ``grad``
    lambdas : array-like
        Temperatures lambda_0..lambda_T in [0, 1], nondecreasing
        (lambda_{-1} = 0 is implicit).
    curvature : tuple (alpha_Q, alpha_V, beta_V), optional
        Strong-convexity/smoothness constants used by schedule builders,
        automatic pCN correlation and the default MALA step size.
    """

    def __init__(self, base, target, lambdas, curvature=None, exact_sampler=None):
        self.base = base
        self.target = target
        lam = np.asarray(lambdas, dtype=float)
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("lambdas must be a non-empty 1-d array")
        if np.any(lam < 0) or np.any(lam > 1) or np.any(np.diff(lam) < 0):
            raise ValueError("temperatures must be nondecreasing within [0, 1]")
        self.lambdas = lam
        self.T = lam.size - 1
        self.dim = base.dim
        self.curvature = curvature
        self._exact_sampler = exact_sampler

    def lam(self, s):
        """lambda_s with the lambda_{-1} = 0 convention."""
        return 0.0 if s < 0 else float(self.lambdas[s])

    def V(self, x):
        x = _as_points(x, self.dim)
        return self.target.potential(x) - self.base.potential(x)

    def grad_V(self, x):
        return self.target.grad(x) - self.base.grad_potential(x)

    def sample_base(self, n, rng):
        return self.base.sample(n, rng)

    def log_target(self, s, x):
        x = _as_points(x, self.dim)
        return -(self.base.potential(x) + self.lam(s) * self.V(x))

    def grad_log_target(self, s, x):
        x = _as_points(x, self.dim)
        return -(self.base.grad_potential(x) + self.lam(s) * self.grad_V(x))

    def log_incremental_weight(self, t, x):
        if not 0 <= t <= self.T:
            raise ValueError(f"iteration t={t} outside 0..{self.T}")
        x = _as_points(x, self.dim)
        delta = self.lam(t) - self.lam(t - 1)
        logg = -delta * self.V(x) if delta != 0.0 else np.zeros(x.shape[0])
        return _check_increment(t, x, logg)

    def pcn_parts(self, s):
        """(base mean, Cholesky of C, potential lambda_s * V) for pCN moves."""
        phi_scale = self.lam(s)

        def phi(x):
            return phi_scale * self.V(x)

        return self.base.mean, self.base.chol_cov, phi

    def exact_sample(self, s, n, rng):
        if self._exact_sampler is None:
            raise NotImplementedError("no exact sampler attached to this path")
        return self._exact_sampler(s, n, rng)


def log_incremental_weight(seq, t, x):
    """log G_t(x) for a single point or a batch; see the sequence classes."""
    out = seq.log_incremental_weight(t, x)
    return float(out[0]) if np.asarray(x).ndim == 1 else out


# ---------------------------------------------------------------------------
# Analytic Gaussian oracle
# ---------------------------------------------------------------------------

def _logdet_chol(L):
    return 2.0 * np.sum(np.log(np.diag(L)))


class GaussianOracle:
    """Exact ground truth along a Gaussian-to-Gaussian tempering path.

    The intermediate pi_lambda is Gaussian with precision
    ``(1-lambda) S0^{-1} + lambda S1^{-1}``; the oracle returns exact
    normalising constants (relative to the base, Z_{-1} = 1), exact per-step
    chi-square divergences, exact moments, and exact samples.
    """

    def __init__(self, base_mean, base_cov, target_mean, target_cov, lambdas):
        self.base = GaussianBase(base_mean, base_cov)
        self.dim = self.base.dim
        tm = np.atleast_1d(np.asarray(target_mean, dtype=float))
        tc = np.asarray(target_cov, dtype=float)
        if tc.ndim == 0:
            tc = float(tc) * np.eye(self.dim)
        self.target_mean, self.target_cov = tm, tc
        self.lambdas = np.asarray(lambdas, dtype=float)
        self.T = self.lambdas.size - 1
        try:
            self._prec0 = cho_solve(cho_factor(self.base.cov, lower=True), np.eye(self.dim))
            self._prec1 = cho_solve(cho_factor(tc, lower=True), np.eye(self.dim))
        except np.linalg.LinAlgError as e:
            raise PathInfeasibleError(f"endpoint covariance not positive definite: {e}")
        self._b0 = self._prec0 @ self.base.mean
        self._b1 = self._prec1 @ tm
        self._c0 = 0.5 * float(self.base.mean @ self._b0)
        self._c1 = 0.5 * float(tm @ self._b1)
        self._log_c_base = self._log_c(0.0)

    # -- path geometry ------------------------------------------------------

    def lam(self, s):
        return 0.0 if s < 0 else float(self.lambdas[s])

    def _precision(self, lam):
        return (1.0 - lam) * self._prec0 + lam * self._prec1

    def _chol_precision(self, lam):
        try:
            return cholesky(self._precision(lam), lower=True)
        except np.linalg.LinAlgError:
            raise PathInfeasibleError(
                f"precision at lambda={lam} not positive definite")

    def mean(self, s):
        """Exact mean of pi_s."""
        lam = self.lam(s)
        b = (1.0 - lam) * self._b0 + lam * self._b1
        L = self._chol_precision(lam)
        return cho_solve((L, True), b)

    def cov(self, s):
        """Exact covariance of pi_s."""
        L = self._chol_precision(self.lam(s))
        return cho_solve((L, True), np.eye(self.dim))

    def sample(self, s, n, rng):
        """n exact draws from pi_s."""
        L = self._chol_precision(self.lam(s))
        # x = mean + L^{-T} z has covariance (L L')^{-1}
        z = rng.standard_normal((n, self.dim))
        return self.mean(s) + solve_triangular(L, z.T, lower=True, trans="T").T

    # -- exact constants ----------------------------------------------------

    def _log_c(self, lam):
        """log int exp(-(Q + lam V)) dx via the Gaussian integral."""
        L = self._chol_precision(lam)
        b = (1.0 - lam) * self._b0 + lam * self._b1
        c = (1.0 - lam) * self._c0 + lam * self._c1
        m = cho_solve((L, True), b)
        return (0.5 * self.dim * np.log(2 * np.pi) - 0.5 * _logdet_chol(L)
                + 0.5 * float(b @ m) - c)

    def log_Z(self, t):
        """Exact log Z_t (Z_{-1} = 1 convention)."""
        if t < -1 or t > self.T:
            raise ValueError(f"t={t} outside -1..{self.T}")
        if t == -1:
            return 0.0
        return self._log_c(self.lam(t)) - self._log_c_base

    def chi2(self, t):
        """Exact chi-square divergence chi^2(pi_t | pi_{t-1}).

        Returns +inf when the divergence is infinite, i.e. when
        2 * prec_t - prec_{t-1} fails to be positive definite.
        """
        if not 0 <= t <= self.T:
            raise ValueError(f"t={t} outside 0..{self.T}")
        p1, p0 = self._precision(self.lam(t)), self._precision(self.lam(t - 1))
        m1 = self.mean(t)
        lam_prev = self.lam(t - 1)
        b0 = (1.0 - lam_prev) * self._b0 + lam_prev * self._b1
        m0 = cho_solve((cholesky(p0, lower=True), True), b0)
        a = 2.0 * p1 - p0
        try:
            la = cholesky(a, lower=True)
        except np.linalg.LinAlgError:
            return np.inf
        b = 2.0 * (p1 @ m1) - p0 @ m0
        log_one_plus = (_logdet_chol(cholesky(p1, lower=True))
                        - 0.5 * _logdet_chol(cholesky(p0, lower=True))
                        - 0.5 * _logdet_chol(la)
                        + 0.5 * float(b @ cho_solve((la, True), b))
                        - float(m1 @ p1 @ m1) + 0.5 * float(m0 @ p0 @ m0))
        return float(np.expm1(log_one_plus))

    # -- sequence view ------------------------------------------------------

    def sequence(self, curvature=None):
        """The GeometricPath realising this oracle's bridging family."""
        return GeometricPath(
            base=self.base,
            target=GaussianPotential(self.target_mean, self.target_cov),
            lambdas=self.lambdas,
            curvature=curvature,
            exact_sampler=self.sample,
        )


def oracle_log_Z(oracle, t):
    """Exact log Z_t of a GaussianOracle."""
    return oracle.log_Z(t)


def oracle_chi2(oracle, t):
    """Exact chi^2(pi_t | pi_{t-1}) of a GaussianOracle (+inf if divergent)."""
    return oracle.chi2(t)


# ---------------------------------------------------------------------------
# Particle clouds
# ---------------------------------------------------------------------------

@dataclass
class ParticleCloud:
    """Per-iteration particle state.

    ``layout`` is ``("chains", M, P)`` for waste-free pools of M chains with P
    states each (N = M * P, chain-major order) or ``("flat", M)`` for the
    standard sampler's endpoint-only pools (N = M).
    """

    t: int
    positions: np.ndarray
    log_weights: np.ndarray
    layout: tuple = field(default=None)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.log_weights = np.asarray(self.log_weights, dtype=float)
        n = self.positions.shape[0]
        if self.log_weights.shape != (n,):
            raise ValueError("log_weights must be one value per particle")
        if self.layout is None:
            self.layout = ("flat", n)
        kind = self.layout[0]
        if kind == "chains":
            _, m, p = self.layout
            if m * p != n:
                raise ValueError(f"chains layout {m}x{p} != pool size {n}")
        elif kind != "flat":
            raise ValueError(f"unknown layout kind {kind!r}")

    @property
    def n(self):
        return self.positions.shape[0]

    def normalized_weights(self):
        return normalize_log_weights(self.log_weights, t=self.t)

    def relative_ess(self):
        return relative_ess(self.log_weights)
