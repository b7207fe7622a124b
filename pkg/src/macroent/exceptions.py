"""Exception types raised by the numerical routines."""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical procedure (not bad input)."""


class ConvergenceError(NumericalError):
    """An iterative procedure did not reach its tolerance."""


class NonConvergentSeriesError(NumericalError):
    """A thermal series diverges for the requested parameters."""


class BudgetExceededError(ValueError):
    """A truncated basis would exceed the configured size budget."""


class OrderOverflowError(ValueError):
    """A Hermite order above the configured maximum was requested."""


class DivergentOptimumError(ValueError):
    """The optimal particle number is infinite (uncoupled ensemble)."""
