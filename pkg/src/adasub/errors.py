class AdasubError(Exception):
    """Base class for library errors."""


class InvalidArgument(AdasubError, ValueError):
    pass


class ImpossibleObservation(AdasubError, ValueError):
    """Conditioning on a partial realization of probability zero."""


class ConstraintMismatch(AdasubError, ValueError):
    pass


class Infeasible(AdasubError, ValueError):
    pass


class TooLarge(AdasubError, RuntimeError):
    """An exact computation or enumeration would exceed its size guard."""


class ParseError(AdasubError, ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)
