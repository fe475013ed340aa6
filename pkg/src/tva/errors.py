"""Exception hierarchy shared by every tva module."""


class TvaError(Exception):
    """Base class for all errors raised by tva."""


class TraceError(TvaError, ValueError):
    pass


class ParseError(TraceError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class SchemaError(TraceError):
    pass


class TooSmallError(TraceError):
    pass


class DegenerateChannelError(TraceError):
    pass


class AlignmentError(TraceError):
    pass


class InvalidInputError(TvaError, ValueError):
    pass


class InvalidGenomeError(TvaError, ValueError):
    pass


class DivergedTrainingError(TvaError, ArithmeticError):
    pass


class InvalidPairError(TvaError, ValueError):
    pass


class UtilityDomainError(TvaError, ArithmeticError):
    pass


class ConfigError(TvaError, ValueError):
    pass
