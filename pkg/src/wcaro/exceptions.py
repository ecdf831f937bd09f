"""Exception hierarchy shared by all wcaro modules."""


class WcaroError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(WcaroError, ValueError):
    pass


class UnboundedOmega(WcaroError):
    """The uncertainty polytope is not compact in some coordinate."""


class EmptyOmega(WcaroError):
    pass


class UnboundedVariable(WcaroError):
    """A quadratic first-level coordinate has no finite range."""


class MissingBetaBounds(WcaroError):
    pass


class NumericalFailure(WcaroError, ArithmeticError):
    """The LP engine could not recover a stable basis."""


class TooLarge(WcaroError):
    """Brute-force enumeration would exceed the configured cap."""


class InfeasibleFirstLevel(WcaroError):
    pass


class ParseError(WcaroError):
    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
                if column is not None:
                    where += f":{column}"
            where += ": "
        super().__init__(where + message)


class UnknownRole(ParseError):
    pass


class LengthMismatch(WcaroError, ValueError):
    pass


class NegativeMultiplier(WcaroError, ValueError):
    pass
