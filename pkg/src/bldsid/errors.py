"""Exception hierarchy.  The CLI maps ConfigError to exit 2 and
NumericalError to exit 3."""


class BldsidError(Exception):
    pass


class ConfigError(BldsidError):
    """Invalid configuration, shapes, or parameter ranges."""


class NumericalError(BldsidError):
    """A numerical failure at run time."""


class InstabilityError(NumericalError):
    """State norm exceeded the overflow guard during simulation."""

    def __init__(self, t: int, norm: float, guard: float):
        self.t = t
        self.norm = norm
        self.guard = guard
        super().__init__(
            f"state norm {norm:.3e} exceeded overflow guard {guard:.3e} at t={t}"
        )


class UnscalableMatrixError(NumericalError):
    """Spectral radius is (numerically) zero, so no scaling can reach a
    positive target."""


class RankDeficiencyError(NumericalError):
    """Observed numerical rank is below the requested realization order."""

    def __init__(self, requested: int, observed: int):
        self.requested = requested
        self.observed = observed
        super().__init__(
            f"Hankel matrix has numerical rank {observed}, below requested order {requested}"
        )
