"""Exception types raised across growmix."""


class GrowMixError(Exception):
    """Base class for all growmix errors."""


class ValidationError(GrowMixError, ValueError):
    """Input does not satisfy a documented precondition."""


class NonSquare(ValidationError):
    pass


class NonFinite(ValidationError):
    pass


class NegativeOffDiagonal(ValidationError):
    def __init__(self, i, j, value):
        self.i, self.j, self.value = i, j, value
        super().__init__(f"off-diagonal entry ({i}, {j}) = {value!r} is negative")


class DimensionMismatch(ValidationError):
    pass


class NotIrreducible(ValidationError):
    pass


class NoConvergence(GrowMixError, ArithmeticError):
    def __init__(self, iterations, last_residual):
        self.iterations = iterations
        self.last_residual = last_residual
        super().__init__(
            f"power iteration did not converge after {iterations} iterations "
            f"(last residual {last_residual:.3e})"
        )


class NonPositiveX(ValidationError):
    pass


class NonPositiveY(ValidationError):
    pass


class BadProbabilityVector(ValidationError):
    pass


class BadBeta(ValidationError):
    pass


class NoCommonPerronVector(ValidationError):
    pass


class WrongConservationClass(ValidationError):
    pass


class PreconditionSpabNonzero(ValidationError):
    pass


class NotHeterogeneous(ValidationError):
    pass


class NotStochastic(ValidationError):
    pass


class BadGrid(ValidationError):
    pass


class Overflow(GrowMixError, OverflowError):
    pass
