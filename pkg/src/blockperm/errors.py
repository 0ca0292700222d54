class BlockPermError(Exception):
    pass


class InvalidSpec(BlockPermError, ValueError):
    pass


class DimensionMismatch(BlockPermError, ValueError):
    pass


class TooLarge(BlockPermError, ValueError):
    pass


class DomainError(BlockPermError, ValueError):
    pass


class BoundsMismatch(BlockPermError, ValueError):
    pass


class NonzeroConstantTerm(BlockPermError, ValueError):
    pass


class InsufficientData(BlockPermError, ValueError):
    pass


class ZeroPermanent(BlockPermError, ArithmeticError):
    pass


class NumericalFailure(BlockPermError, ArithmeticError):
    pass


class DegenerateSpectrum(NumericalFailure):
    pass


class NonPositiveHessian(NumericalFailure):
    pass


class DegenerateFrame(NumericalFailure):
    pass


class NotConverged(BlockPermError, RuntimeError):
    """Iterative solver hit its iteration cap.

    The last iterate and its residual are kept on the exception so callers
    can inspect or reuse them.
    """

    def __init__(self, message, last=None, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.last = last
        self.residual = residual
        self.iterations = iterations


class DomainWarning(UserWarning):
    pass
