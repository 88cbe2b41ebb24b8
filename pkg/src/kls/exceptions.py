"""Exception hierarchy shared by every module in the package."""


class KLError(Exception):
    """Base class for all errors raised by ``kls``."""


class InvalidArgument(KLError, ValueError):
    pass


class InvalidDensity(InvalidArgument):
    pass


class DegenerateMeasure(KLError, ValueError):
    pass


class Unsupported(KLError, NotImplementedError):
    pass


class UnsupportedPoint(Unsupported):
    """A tabulated kernel was evaluated away from its grid nodes."""


class GridMismatch(KLError, ValueError):
    pass


class NumericError(KLError, ArithmeticError):
    pass


class DegenerateKernel(NumericError):
    pass


class HypothesisViolated(KLError, ValueError):
    """The eigenvalue decay does not satisfy the small-ball hypothesis alpha*beta > 1."""


class InsufficientData(KLError):
    pass


class InsufficientRank(KLError):
    pass
