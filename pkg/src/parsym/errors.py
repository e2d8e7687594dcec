"""Exception hierarchy shared by all modules."""


class ParsymError(Exception):
    """Base class for every error raised by the package."""


class InputError(ParsymError, ValueError):
    """Malformed user input (domain files, configs, parameters)."""


class NumericalError(ParsymError, RuntimeError):
    """A numerical procedure failed to produce a trustworthy result."""


class NoCriticalPosition(NumericalError):
    pass


class EmptyDomain(NumericalError):
    pass


class OutOfDomain(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass


class NegativeSolution(NumericalError):
    pass


class DegenerateSurface(NumericalError):
    pass


class DegenerateFit(NumericalError):
    pass


class NonPositiveK(NumericalError):
    pass


class NonPositiveD0(NumericalError):
    pass


class HypothesisViolated(NumericalError):
    pass


class NotHarmonic(NumericalError):
    pass


class NotSolution(NumericalError):
    pass


class NoPath(NumericalError):
    pass
