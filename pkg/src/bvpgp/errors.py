"""Exception hierarchy.

Validation problems derive from :class:`ValidationError` (CLI exit code 2),
numerical breakdowns from :class:`NumericalError` (CLI exit code 3).
"""


class BVPGPError(Exception):
    pass


class ValidationError(BVPGPError, ValueError):
    pass


class NumericalError(BVPGPError, ArithmeticError):
    pass


class PointOutsideDomain(ValidationError):
    def __init__(self, index, point=None):
        self.index = int(index)
        self.point = point
        msg = f"point {self.index} lies outside the domain"
        if point is not None:
            msg += f": {list(point)}"
        super().__init__(msg)


class NonFiniteValue(ValidationError):
    pass


class EmptyDataset(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class ZeroReference(ValidationError):
    pass


class DimMismatch(ValidationError):
    pass


class InvalidOrder(ValidationError):
    pass


class InvalidCount(ValidationError):
    pass


class UnknownProblem(ValidationError):
    pass


class UnsupportedOperator(ValidationError):
    pass


class KindUnsupportedByKernel(ValidationError):
    pass


class NoiseFloorViolation(ValidationError):
    pass


class CholeskyFailure(NumericalError):
    def __init__(self, message, min_pivot=None):
        self.min_pivot = min_pivot
        super().__init__(message)


class ZFactorizationFailure(NumericalError):
    pass


class NegativeVariance(NumericalError):
    pass


class AllRestartsFailed(NumericalError):
    pass
