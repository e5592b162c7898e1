"""Exception hierarchy.

Everything a caller can fix by changing inputs derives from
:class:`ValidationError`; failures of the numerics on otherwise valid input
derive from :class:`NumericalError`.  The CLI maps the two families to
exit codes 2 and 3.
"""


class TylerBoundError(Exception):
    pass


class ValidationError(TylerBoundError, ValueError):
    pass


class NumericalError(TylerBoundError, ArithmeticError):
    pass


class NotSymmetric(ValidationError):
    pass


class NotPositiveDefinite(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ZeroSample(ValidationError):
    def __init__(self, row):
        super().__init__(f"sample in row {row} has zero norm")
        self.row = row


class NonPositiveTexture(ValidationError):
    pass


class NotEnoughSamples(ValidationError):
    pass


class UnsupportedOrder(ValidationError):
    pass


class OddOrder(ValidationError):
    pass


class BelowValidityThreshold(ValidationError):
    def __init__(self, message, threshold):
        super().__init__(message)
        self.threshold = threshold


class TauOutOfWindow(ValidationError):
    def __init__(self, message, window):
        super().__init__(message)
        self.window = window


class EpsilonTooLarge(ValidationError):
    pass


class QuadFormUnderflow(NumericalError):
    pass


class SingularSCM(NumericalError):
    pass


class NotConverged(NumericalError):
    """Fixed-point iteration stopped without certifying the equation.

    ``residuals`` holds the residual trace, one entry per iteration.
    """

    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)
