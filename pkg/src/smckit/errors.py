"""Exception types shared across the toolkit."""

import numpy as np


class SMCError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SMCError):
    """Invalid configuration (bad key, bad value, missing requirement)."""


class NonFiniteDensityError(SMCError):
    """A log-density or incremental weight evaluated to NaN/inf where finite
    values are required.  Carries the iteration index and offending point."""

    def __init__(self, t, x, what="log-density"):
        self.t = t
        self.x = x
        try:
            point = np.asarray(x).ravel().tolist()
        except Exception:  # pragma: no cover
            point = x
        super().__init__(f"non-finite {what} at iteration t={t}, x={point}")


class PathInfeasibleError(SMCError):
    """The interpolating Gaussian path has a non positive-definite precision."""


class DegenerateCloudError(SMCError):
    """All particle weights vanished; the run cannot continue.  Carries the
    iteration at which degeneracy was detected."""

    def __init__(self, t, detail="all weights are zero"):
        self.t = t
        super().__init__(f"degenerate particle cloud at iteration t={t}: {detail}")


class StateCorruptionError(SMCError):
    """A Markov kernel was asked to move from a state with non-finite
    log-density; the chain state is unusable."""


class AbortedRunError(SMCError):
    """An estimator was requested from a run that aborted.  Carries the
    iteration recorded at abort time."""

    def __init__(self, t):
        self.t = t
        super().__init__(f"run aborted at iteration t={t}; estimate unavailable")
