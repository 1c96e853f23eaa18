"""Exception hierarchy shared by the solver, quadrature and simulators."""


class EvonetError(Exception):
    """Base class for all package errors."""


class ConfigError(EvonetError, ValueError):
    """Invalid parameters, presets or configuration files."""


class NumericalError(EvonetError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy value."""


class RateOverflow(NumericalError):
    """``F+(k)/t + F-(k)/t`` exceeds 1, so the step is not a probability law."""


class Divergent(NumericalError):
    """An integral is not finite for the requested exponents."""


class NoConvergence(NumericalError):
    """An iterative or extrapolated quantity failed to settle."""


class NotConverged(NoConvergence):
    """Quadrature budget exhausted before reaching the tolerance."""


class DenominatorVanishes(NumericalError):
    pass


class DomainError(NumericalError, ValueError):
    pass


class RequiresLinearRoute(NumericalError):
    """The integral formula for P(0) does not apply; use the linear closure."""


class SingularSystem(NumericalError):
    pass


class SeamMismatch(NumericalError):
    """Head and tail disagree at the boundary degree M."""


class InfeasibleSeed(ConfigError):
    pass


class Deadlock(EvonetError, RuntimeError):
    """The graph cannot perform the requested move (no edge, too few targets)."""


class InsufficientTail(EvonetError, ValueError):
    pass


class RewireSkipped(EvonetError, RuntimeWarning):
    """A rewiring move picked an isolated node; counted in the run statistics."""
