"""Exception hierarchy shared by all modules."""


class FracPoisError(Exception):
    """Base class for numerical failures raised by this package."""


class DomainError(FracPoisError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NonConvergence(FracPoisError, ArithmeticError):
    """An expansion or iteration did not reach the requested tolerance."""


class NumericalInstability(FracPoisError, ArithmeticError):
    """Successive accelerated estimates disagree beyond the allowed band."""


class TailLocationFailure(FracPoisError, ArithmeticError):
    """Bisection could not bracket the requested tail probability."""


class GridTooCoarse(FracPoisError, ValueError):
    pass


class BudgetExceeded(FracPoisError, RuntimeError):
    pass


class QuadratureFailure(FracPoisError, ArithmeticError):
    pass
