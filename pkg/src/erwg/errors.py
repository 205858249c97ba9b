"""Exception hierarchy for the erwg package."""


class ERWGError(Exception):
    """Base class for all package errors."""


class InvalidConfig(ERWGError, ValueError):
    pass


class ZeroInDegree(InvalidConfig):
    def __init__(self, vertex: int):
        super().__init__(f"vertex {vertex} has no in-neighbour")
        self.vertex = vertex


class DuplicateEdge(InvalidConfig):
    def __init__(self, edge):
        super().__init__(f"duplicate edge {tuple(edge)}")
        self.edge = tuple(edge)


class ProbabilityOutOfRange(ERWGError):
    pass


class NotDiagonalizable(ERWGError):
    pass


class NotRealDiagonalizable(ERWGError):
    pass


class TooLarge(ERWGError):
    pass


class NotDiffusive(ERWGError):
    pass


class NotCritical(ERWGError):
    pass


class NotSuperdiffusive(ERWGError):
    pass


class NoSubCriticalProjections(ERWGError):
    pass


class Singular(ERWGError):
    pass


class RegimeMismatch(ERWGError):
    pass


class NotStronglyConnected(ERWGError):
    pass


class MemoryNotOne(ERWGError):
    pass


class Unsupported(ERWGError):
    """Raised where a quantity exists in theory but is not computed here."""
