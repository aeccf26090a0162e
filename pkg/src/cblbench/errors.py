"""Exception hierarchy shared by all modules."""


class CBLError(Exception):
    """Base class for every error raised by cblbench."""


class ParseError(CBLError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class DuplicateError(ParseError):
    pass


class ShapeError(CBLError):
    pass


class MembershipError(CBLError):
    pass


class ConfigError(CBLError, ValueError):
    pass


class CoverageError(CBLError):
    pass


class InsufficientHistoryError(CBLError):
    pass


class DataError(CBLError):
    pass


class EmissionError(CBLError):
    pass
