"""Tempering schedules: closed-form theory schedule, equidistant grid,
Example-style linear ramp, and the ESS-adaptive rule.

The theory schedule takes the largest temperature increments allowed by the
step rule

    lambda_t - lambda_{t-1} <= c (alpha_Q + lambda_{t-1} alpha_V) / (beta_V sqrt(d)),

run as an equality from lambda_{-1} = 0 until the cap at 1.  Every consecutive
pair then keeps the chi-square divergence below c^2 (1 + 24/sqrt(d)); with
``default_c(d)`` that is at most 1/64, far inside the "1 + chi^2 <= 2" regime
the samplers' guarantees assume.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .weights import relative_ess

__all__ = [
    "Schedule", "geometric_schedule", "default_c", "equidistant_schedule",
    "linear_schedule", "adaptive_ess_schedule",
]


@dataclass
class Schedule:
    """Temperatures lambda_0 <= ... <= lambda_T with lambda_T = 1 exactly
    (lambda_{-1} = 0 is implicit).  Flat segments are allowed: trailing
    stationary iterations and trivial sequences use them."""

    lambdas: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.ndim != 1 or lam.size == 0:
            raise ConfigError("schedule must be a non-empty 1-d array")
        if np.any(lam < 0) or np.any(lam > 1):
            raise ConfigError("temperatures must lie in [0, 1]")
        if np.any(np.diff(lam) < 0):
            raise ConfigError("temperatures must be nondecreasing")
        if lam[-1] != 1.0:
            raise ConfigError(f"final temperature must be exactly 1, got {lam[-1]}")
        self.lambdas = lam

    @property
    def T(self):
        return self.lambdas.size - 1

    def __len__(self):
        return self.lambdas.size

    def __iter__(self):
        return iter(self.lambdas)


def default_c(d):
    """Step-rule constant 1 / (8 sqrt(1 + 24/sqrt(d))).

    Guarantees chi^2(pi_t | pi_{t-1}) <= 1/64 along the equality-case
    schedule, hence 1 + chi^2 <= 2.
    """
    if d < 1:
        raise ConfigError(f"dimension must be >= 1, got {d}")
    return 1.0 / (8.0 * np.sqrt(1.0 + 24.0 / np.sqrt(d)))


def geometric_schedule(alpha_q, alpha_v, beta_v, d, c, lambda0=None):
    """Equality-case schedule of the chi-square step rule.

    Runs lambda_t = lambda_{t-1} + c (alpha_Q + lambda_{t-1} alpha_V)
    / (beta_V sqrt(d)) from lambda_{-1} = 0, capping at 1; equivalently
    lambda_t = min(1, (alpha_Q/alpha_V) [(1 + c/(kappa_V sqrt(d)))^{t+1} - 1])
    with kappa_V = beta_V / alpha_V.  The horizon grows like
    kappa_V sqrt(d) log(1 + alpha_V / (c alpha_Q)).

    For alpha_Q = 0 the recursion cannot leave 0; a user-supplied
    ``lambda0 > 0`` seeds it and the same step rule applies from there.
    """
    if alpha_v <= 0 or beta_v <= 0:
        raise ConfigError("alpha_v and beta_v must be positive")
    if alpha_q < 0:
        raise ConfigError("alpha_q must be nonnegative")
    if not 0.0 < c <= 0.125:
        raise ConfigError(f"c must be in (0, 1/8], got {c}")
    if alpha_q == 0.0:
        if lambda0 is None or not 0.0 < lambda0 < 1.0:
            raise ConfigError("alpha_q = 0 requires a starting temperature "
                              "lambda0 in (0, 1)")
        lam = [float(lambda0)]
    else:
        lam = []
    step_den = beta_v * np.sqrt(d)
    prev = lam[-1] if lam else 0.0
    # terminates: increments are bounded below by c*alpha_q/step_den (or grow
    # geometrically from lambda0), so 1 is reached in finitely many steps
    while prev < 1.0:
        nxt = prev + c * (alpha_q + prev * alpha_v) / step_den
        if nxt >= 1.0:
            nxt = 1.0
        lam.append(nxt)
        prev = nxt
    return Schedule(np.array(lam))


def equidistant_schedule(T):
    """Equidistant temperatures lambda_t = (t+1)/(T+1), t = 0..T; every
    increment, including the first step away from the base, equals 1/(T+1)."""
    if T < 0:
        raise ConfigError(f"T must be >= 0, got {T}")
    return Schedule((np.arange(T + 1) + 1.0) / (T + 1.0))


def linear_schedule(d, delta, max_T=100000):
    """Linear ramp lambda_t = min(1, lambda_{t-1} + delta/sqrt(d)).

    ``delta`` has no endorsed default; it is a configuration knob.
    """
    if delta <= 0:
        raise ConfigError(f"delta must be positive, got {delta}")
    step = delta / np.sqrt(d)
    n = int(np.ceil(1.0 / step))
    if n > max_T:
        raise ConfigError(f"linear schedule would need {n} > {max_T} steps")
    lam = np.minimum(1.0, step * (np.arange(n) + 1.0))
    lam[-1] = 1.0
    return Schedule(lam)


def adaptive_ess_schedule(v_values, current_lambda, target_ress,
                          delta_min=1e-6, tol=1e-10, max_iter=100):
    """Next temperature chosen so the relative ESS of the reweighted cloud
    hits ``target_ress``.

    ``v_values`` are V(x_i) over the current (equally weighted, post-move)
    particles; the candidate incremental log-weights are ``-delta * V``.
    Bisection runs on the nonincreasing map delta -> rESS(delta) to within
    ``tol`` in lambda.  Returns ``(next_lambda, warned)``; ``warned`` is True
    when the ESS target is unreachable even as delta -> 0+ and the minimal
    step ``delta_min`` was taken instead.
    """
    if not 0.0 < target_ress < 1.0:
        raise ConfigError(f"target relative ESS must be in (0, 1), got {target_ress}")
    if not 0.0 <= current_lambda < 1.0:
        raise ConfigError(f"current lambda must be in [0, 1), got {current_lambda}")
    v = np.asarray(v_values, dtype=float)

    def ress(delta):
        return relative_ess(-delta * v)

    hi = 1.0 - current_lambda
    if ress(hi) >= target_ress:
        return 1.0, False
    lo = 0.0
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if ress(mid) >= target_ress:
            lo = mid
        else:
            hi = mid
    delta = 0.5 * (lo + hi)
    if delta < delta_min:
        return min(1.0, current_lambda + delta_min), True
    return min(1.0, current_lambda + delta), False
