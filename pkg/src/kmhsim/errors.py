"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates an operation's precondition."""


class UndefinedStatisticError(ArithmeticError):
    """A statistic was requested where it has no defined value (e.g. zero mean)."""


class NoSolutionError(ValueError):
    """A model inversion has no real solution for the given inputs."""


class TruncationWarning(UserWarning):
    """Emitted when Fock-space truncation discards more probability than allowed."""
