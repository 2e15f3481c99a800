"""Exception hierarchy shared by all spacedec modules."""


class SpacedecError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(SpacedecError, ValueError):
    pass


class RankDeficient(SpacedecError, ValueError):
    pass


class ProjectionUndefined(SpacedecError, ValueError):
    """The metric projection onto a constraint manifold is not defined at the input."""


class EmptyManifold(SpacedecError, ValueError):
    pass


class InvalidTangent(SpacedecError, ValueError):
    pass


class CayleySingular(SpacedecError, ArithmeticError):
    pass


class InfeasiblePoint(SpacedecError, ValueError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ObjectiveError(SpacedecError, RuntimeError):
    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class InvalidConfig(SpacedecError, ValueError):
    pass


class DegenerateGraphs(SpacedecError, ValueError):
    pass
