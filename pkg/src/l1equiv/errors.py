"""Exception hierarchy shared by all modules."""


class L1EquivError(Exception):
    """Base class for all package errors."""


class InvalidInputError(L1EquivError, ValueError):
    """Inputs violate a documented precondition."""


class NoSolutionError(L1EquivError):
    """The requested quantity does not exist for the given data."""


class OracleFailure(L1EquivError):
    """A test oracle failed to converge; never treated as a pass."""


class NumericalBlowup(L1EquivError, FloatingPointError):
    """A right-hand side was evaluated on a non-finite state."""


class BracketError(L1EquivError):
    """Both ends of a bisection bracket share the same verdict."""


class NotApplicableError(L1EquivError):
    """The check's hypothesis does not hold for this run (e.g. it diverged)."""
