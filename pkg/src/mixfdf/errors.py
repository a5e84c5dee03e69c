"""Exception hierarchy shared by all mixfdf modules."""


class MixFdfError(Exception):
    """Base class for every error raised by this package."""


class InvalidMatrix(MixFdfError, ValueError):
    pass


class DimensionMismatch(MixFdfError, ValueError):
    pass


class NotPsd(MixFdfError, ValueError):
    pass


class Singular(MixFdfError, ArithmeticError):
    pass


class IllConditioned(MixFdfError, ArithmeticError):
    pass


class EmptyProbe(MixFdfError, ValueError):
    pass


class Infeasible(MixFdfError):
    """The LMI system has no assignment with the requested strict margin.

    ``best_margin`` carries the optimal epigraph value found by the solver.
    """

    def __init__(self, message, best_margin=None, certificate=None):
        super().__init__(message)
        self.best_margin = best_margin
        self.certificate = certificate


class IterationLimit(MixFdfError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SectorBoundUnverified(MixFdfError):
    pass


class NumericalBlowup(MixFdfError, ArithmeticError):
    def __init__(self, message, path=None, step=None):
        super().__init__(message)
        self.path = path
        self.step = step


class EmptyEnsemble(MixFdfError, ValueError):
    pass


class EmptyFamily(MixFdfError, ValueError):
    pass


class ZeroEnergyInput(MixFdfError, ValueError):
    pass


class ScenarioError(MixFdfError, ValueError):
    pass
