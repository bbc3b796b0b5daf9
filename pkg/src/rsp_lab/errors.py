"""Exception hierarchy.

Two families matter to callers (and to the CLI's exit codes): ``InputError``
for bad or inapplicable inputs, and ``NumericalError`` for computations that
ran but could not certify their result.
"""


class RSPLabError(Exception):
    """Base class for all errors raised by this package."""


class InputError(RSPLabError, ValueError):
    pass


class NumericalError(RSPLabError, ArithmeticError):
    pass


class DimMismatch(InputError):
    pass


class IndexMismatch(InputError):
    pass


class UnknownName(InputError, KeyError):
    def __str__(self):  # KeyError quotes its message otherwise
        return Exception.__str__(self)


class UnknownLabel(InputError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class ParseError(InputError):
    def __init__(self, reason, position=None):
        self.reason = reason
        self.position = position
        where = f" at {position}" if position is not None else ""
        super().__init__(f"parse error{where}: {reason}")


class ValidationError(InputError):
    """A value violates a domain invariant.

    ``invariant`` names the violated invariant, ``violation`` is the measured
    amount (when meaningful) and ``label`` the offending item, if any.
    """

    invariant = "Invalid"

    def __init__(self, message, *, invariant=None, violation=None, label=None):
        if invariant is not None:
            self.invariant = invariant
        self.violation = violation
        self.label = label
        super().__init__(message)


class NotSquare(ValidationError):
    invariant = "NotSquare"


class NotHermitian(ValidationError):
    invariant = "NotHermitian"


class NotUnitTrace(ValidationError):
    invariant = "NotUnitTrace"


class NotPSD(ValidationError):
    invariant = "NotPSD"


class NotNormalized(ValidationError):
    invariant = "NotNormalized"


class TooManyStates(InputError):
    pass


class SupportViolation(InputError):
    """supp(rho) is not contained in supp(sigma); the divergence is infinite."""

    def __init__(self, message, label=None):
        self.label = label
        super().__init__(message)


class ReducedStateMismatch(InputError):
    pass


class ZeroWeight(NumericalError):
    pass


class CertificateInfeasible(NumericalError):
    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class NumericalFailure(NumericalError):
    pass


class MaxIterExceeded(NumericalError):
    """The capacity iteration hit its budget; ``result`` holds the best iterate."""

    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)
