"""Exception hierarchy shared by every qfikit module."""


class QfiError(Exception):
    """Base class for all errors raised by qfikit."""


class ArgumentError(QfiError, ValueError):
    """An argument violates an operation's precondition."""


class ResourceError(QfiError):
    """A requested dimension exceeds the configured maximum."""


class NumericPrecisionError(QfiError, ArithmeticError):
    """A computation fell below the double-precision floor."""


class SingularDistributionError(ArgumentError):
    """A probability vanishes while its derivative does not."""


class RankChangeError(QfiError):
    """The derivative has weight outside the support of the state."""


class ConfigurationError(QfiError):
    """A derivative strategy or scenario option is inapplicable."""


class StateError(QfiError):
    """An object is used before it reached the required state."""


class ValidationError(QfiError):
    """Scenario validation failed; ``problems`` lists every failing field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
