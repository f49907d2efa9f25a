"""Exception hierarchy shared by all modules."""


class ImplvarError(Exception):
    """Base class for all package errors."""


class DimensionTooLarge(ImplvarError):
    pass


class NumericallyDegenerate(ImplvarError):
    pass


class InconclusiveCover(ImplvarError):
    """Raised by subset checks when a covering LP would be needed but is disabled."""


class NotAMember(ImplvarError):
    pass


class EnumerationCapExceeded(ImplvarError):
    pass


class MissingConeData(ImplvarError):
    pass


class Inconsistent(ImplvarError):
    """Computed stationarity flags violate an unconditional implication.

    This never describes a property of the optimization problem; it means the
    cone calculus produced contradictory answers.
    """


class InfeasibleInstance(ImplvarError):
    pass


class ParseError(ImplvarError):
    pass


class ValidationError(ImplvarError):
    pass


class UnrecognizedLayout(ImplvarError):
    pass
