"""Finite-sample parameter planning: integer (M, P, J) recommendations.

Each planner turns one of the finite-sample guarantees into concrete
integers by substituting the requested accuracy epsilon, failure probability
eta, horizon T, spectral gap gamma (or a mixing-time function tau), and the
chi-square bound.  Everything is a pure formula: the planner never estimates
gamma or tau from data.  Real-valued bounds are ceilinged before any cost
product so the recommendations are conservative and reproducible.

``fidelity`` records whether a formula carries the paper-exact constants or
only the stated shape with an implementer-chosen constant.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = [
    "PlanInput", "PlanResult", "mixing_time_from_gap", "plan_standard_moments",
    "plan_wastefree_moments", "plan_greedy_moments", "plan_wastefree_z",
    "plan_medians_z", "plan_standard_z",
]


@dataclass
class PlanInput:
    """Inputs shared by the planners.

    ``tau`` is an optional mixing-time function tau(xi, omega); when absent
    it is synthesised from the spectral gap via ``mixing_time_from_gap``
    (warmness omega = 2 wherever a theorem leaves it implicit).
    """

    epsilon: float
    eta: float = 0.25
    T: int = 1
    M: int = 1
    gamma: float = None
    chi_bar_sq: float = 2.0
    tau: object = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0.0 < self.eta < 1.0:
            raise ConfigError(f"eta must be in (0, 1), got {self.eta}")
        if self.T < 1:
            raise ConfigError(f"T must be >= 1, got {self.T}")
        if self.M < 1:
            raise ConfigError(f"M must be >= 1, got {self.M}")
        if self.gamma is not None and not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.chi_bar_sq < 1.0:
            raise ConfigError(f"chi_bar_sq must be >= 1, got {self.chi_bar_sq}")

    def mixing_time(self, xi, omega=2.0):
        if self.tau is not None:
            return int(self.tau(xi, omega))
        if self.gamma is None:
            raise ConfigError("need either a mixing-time function or a spectral gap")
        return mixing_time_from_gap(xi, omega, self.gamma)


@dataclass
class PlanResult:
    """Integer recommendation with its provenance and total Markov-step cost."""

    formula_tag: str
    fidelity: str
    T: int
    M: int
    P: int = None
    P_array: np.ndarray = None
    J: int = 1
    predicted_cost: int = 0
    notes: dict = field(default_factory=dict)

    def cost_from_fields(self):
        """Recompute the cost from the stored integers (self-consistency)."""
        if self.P_array is not None:
            return int(self.J * self.M * int(np.sum(self.P_array[1:])))
        return int(self.J * self.T * self.M * self.P)


def _finish(result):
    result.predicted_cost = result.cost_from_fields()
    return result


def mixing_time_from_gap(xi, omega, gamma):
    """ceil(log(omega/xi) / gamma): mixing time to TV-distance xi from any
    omega-warm start for a kernel with spectral gap gamma."""
    if not 0.0 < gamma <= 1.0:
        raise ConfigError(f"gamma must be in (0, 1], got {gamma}")
    if xi <= 0 or xi > omega:
        raise ConfigError(f"need 0 < xi <= omega, got xi={xi}, omega={omega}")
    return int(math.ceil(math.log(omega / xi) / gamma))


def plan_standard_moments(inp):
    """Moment guarantee for standard SMC: |pi_hat(f) - pi(f)| < eps w.p. 1-eta.

    M = ceil(log(8 T / eta^2) max(18 chi_bar^2, eps^-2 / 2)),
    P = tau(eta / (2 M T), 2).
    """
    m = math.ceil(math.log(8.0 * inp.T / inp.eta**2)
                  * max(18.0 * inp.chi_bar_sq, inp.epsilon**-2 / 2.0))
    p = inp.mixing_time(inp.eta / (2.0 * m * inp.T), 2.0)
    return _finish(PlanResult("standard-moments", "paper-exact",
                              T=inp.T, M=int(m), P=max(int(p), 1)))


def plan_wastefree_moments(inp):
    """Moment guarantee for waste-free SMC at fixed M:
    P = ceil(max(128/gamma log(32 M T / eta),
                 128/(gamma eps^2) log(64 T / eta)))."""
    if inp.gamma is None:
        raise ConfigError("waste-free planning needs a spectral gap")
    p = math.ceil(max(
        128.0 / inp.gamma * math.log(32.0 * inp.M * inp.T / inp.eta),
        128.0 / (inp.gamma * inp.epsilon**2) * math.log(64.0 * inp.T / inp.eta)))
    return _finish(PlanResult("wastefree-moments", "paper-exact",
                              T=inp.T, M=inp.M, P=int(p)))


def plan_greedy_moments(inp):
    """Same guarantee as plan_wastefree_moments with iteration-dependent P:
    P_t = ceil(128/gamma log(32 M T/eta)) for t < T,
    P_T = ceil(128/(gamma eps^2) log(64 T/eta))."""
    if inp.gamma is None:
        raise ConfigError("greedy planning needs a spectral gap")
    p_early = math.ceil(128.0 / inp.gamma * math.log(32.0 * inp.M * inp.T / inp.eta))
    p_last = math.ceil(128.0 / (inp.gamma * inp.epsilon**2)
                       * math.log(64.0 * inp.T / inp.eta))
    ps = np.full(inp.T + 1, int(p_early), dtype=np.int64)
    ps[-1] = int(p_last)
    return _finish(PlanResult("greedy-moments", "paper-exact",
                              T=inp.T, M=inp.M, P_array=ps))


def plan_wastefree_z(inp):
    """Normalising-constant guarantee |Zhat/Z - 1| < eps w.p. >= 3/4 for
    waste-free SMC: M = 1, P = ceil(2560 T^3 / (gamma eps^2)).

    For M > 1 the same guarantee needs P >= ceil(32 log(64 M T)/gamma),
    emitted as a side condition.
    """
    if inp.gamma is None:
        raise ConfigError("waste-free planning needs a spectral gap")
    if inp.epsilon > 2.0:
        raise ConfigError(f"epsilon must be in (0, 2], got {inp.epsilon}")
    p = math.ceil(2560.0 * inp.T**3 / (inp.gamma * inp.epsilon**2))
    side = math.ceil(32.0 * math.log(64.0 * inp.M * inp.T) / inp.gamma)
    return _finish(PlanResult(
        "wastefree-z", "paper-exact", T=inp.T, M=1, P=int(p),
        notes={"min_P_for_M_ge_1": int(side),
               "success_probability": 0.75}))


def plan_medians_z(inp):
    """Product-of-medians guarantee w.p. 1 - eta:
    J = 12 ceil(log(T/eta)) + 1, M = 1, P = ceil(2560 T^2 / (eps^2 gamma))."""
    if inp.gamma is None:
        raise ConfigError("median planning needs a spectral gap")
    if inp.epsilon > 2.0:
        raise ConfigError(f"epsilon must be in (0, 2], got {inp.epsilon}")
    j = 12 * math.ceil(math.log(inp.T / inp.eta)) + 1
    p = math.ceil(2560.0 * inp.T**2 / (inp.epsilon**2 * inp.gamma))
    side = math.ceil(32.0 * math.log(64.0 * inp.M * inp.T) / inp.gamma)
    return _finish(PlanResult("medians-z", "paper-exact",
                              T=inp.T, M=1, P=int(p), J=int(j),
                              notes={"min_P_for_M_ge_1": int(side)}))


def plan_standard_z(inp, medians=False, standard_z_constant=64.0):
    """Normalising-constant planning for standard SMC under mixing times.

    Means variant (success probability 3/4): M = ceil(64 T^3 / eps^2)
    with the proof constant, P = tau(1/(M T), 2).  Medians variant: the
    guarantee is stated only up to constants; M = ceil(c T^2 / eps^2) with
    ``standard_z_constant`` c (default 64, mirroring the means proof) and
    J = 12 ceil(log(T/eta)) + 1.  With MALA mixing times
    tau(xi) = O(kappa sqrt(d) polylog 1/xi) the medians total cost scales as
    d^2 kappa^4 / eps^2 up to log factors.
    """
    if medians:
        m = math.ceil(standard_z_constant * inp.T**2 / inp.epsilon**2)
        j = 12 * math.ceil(math.log(inp.T / inp.eta)) + 1
        tag, fid = "standard-z-medians", "paper-shape"
        notes = {"constant": standard_z_constant,
                 "constant_origin": "implementer default, means-proof value"}
    else:
        m = math.ceil(64.0 * inp.T**3 / inp.epsilon**2)
        j = 1
        tag, fid = "standard-z-means", "paper-exact"
        notes = {"success_probability": 0.75}
    p = inp.mixing_time(1.0 / (m * inp.T), 2.0)
    notes["mala_pairing"] = ("with tau(xi) = O(kappa sqrt(d) polylog 1/xi), "
                             "total cost = O~(d^2 kappa^4 eps^-2) for medians")
    return _finish(PlanResult(tag, fid, T=inp.T, M=int(m),
                              P=max(int(p), 1), J=int(j), notes=notes))
