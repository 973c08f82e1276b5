"""Exception types shared across the package."""


class SolvharmError(Exception):
    """Base class for every failure this package raises on purpose."""


class NonConvergent(SolvharmError):
    """An adaptive series or iteration hit its term cap before its tolerance."""


class ZeroArgument(SolvharmError):
    """An argument that must be nonzero (the loop parameter, a step count) was zero."""


class ParamMismatch(SolvharmError):
    """Operands carry different group parameters and cannot be combined."""


class SingularMetric(SolvharmError):
    """A metric tensor is degenerate beyond tolerance."""


class BandOverflow(SolvharmError):
    """A Laurent band is too small for the requested computation."""


class GridTooSmall(SolvharmError):
    """A grid lacks the interior points the finite-difference stencils need."""


class NonCommuting(SolvharmError):
    """Data that must commute does not."""


class SingularityTooClose(SolvharmError):
    """An evaluation point sits too close to the grid boundary or a quadrature node."""
