"""Exception types raised across the package."""


class FlashSimError(Exception):
    pass


class DomainError(FlashSimError, ValueError):
    """An argument lies outside the domain of a model function."""


class NotSemiSymmetricError(FlashSimError, ValueError):
    pass


class NoSingularityError(FlashSimError):
    """det A(t) has no root on [0, T]."""


class AmbiguousRootError(FlashSimError):
    """det A(t) touches zero without changing sign (even multiplicity)."""


class UnsupportedMultiplicityError(FlashSimError):
    pass


class RankError(FlashSimError):
    """D(t_e) has numerical rank above one."""


class NearSingularError(FlashSimError):
    """The feedback matrix A(t) is numerically singular on the grid."""


class StepUnderflowError(FlashSimError):
    pass


class InsufficientWindowError(FlashSimError):
    pass


class RegimeError(FlashSimError):
    """The requested study needs a crash regime but the market has none."""


class ConfigError(FlashSimError, ValueError):
    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = ""
        if field is not None:
            where += f"{field}: "
        if line is not None:
            where = f"line {line}: " + where
        super().__init__(where + message)


class IntegerLambdaWarning(UserWarning):
    """lambda is (numerically) an integer; asymptotic classification refused."""
