"""Exception types raised across the package."""


class SqlaError(Exception):
    """Base class for all errors raised by sqla."""


class EmptySupport(SqlaError, ValueError):
    """Sampling was requested from a vector with zero norm."""


class IndexOutOfRange(SqlaError, IndexError):
    pass


class DuplicateIndex(SqlaError, ValueError):
    pass


class DimensionMismatch(SqlaError, ValueError):
    pass


class LengthMismatch(SqlaError, ValueError):
    pass


class AcceptanceBoundViolated(SqlaError):
    """A uniform-rejection acceptance probability exceeded one.

    The overhead constant ``C`` given at construction was too small.
    ``index`` is the offending 1-based index.
    """

    def __init__(self, index, probability):
        super().__init__(
            f"acceptance probability {probability:.6g} > 1 at index {index}; "
            "the overhead constant C is too small"
        )
        self.index = index
        self.probability = probability


class InconsistentOracle(SqlaError):
    """An integration oracle produced a branch probability outside [0, 1]."""


class AbortedAfterBudget(SqlaError):
    """Rejection sampling ran out of attempts before a success."""

    def __init__(self, budget):
        super().__init__(f"no success within {budget} consecutive attempts")
        self.budget = budget


class ZeroImage(SqlaError, ValueError):
    """``Vw`` is the zero vector, so the overhead ``C(V, w)`` is undefined."""


class InvalidEpsilon(SqlaError, ValueError):
    pass


class SingularSigma(SqlaError, ValueError):
    pass


class ConvergenceFailure(SqlaError):
    pass


class InsufficientRank(SqlaError):
    """Fewer singular values cleared the threshold than components requested."""

    def __init__(self, ell, k):
        super().__init__(f"only {ell} singular values above threshold, {k} requested")
        self.ell = ell
        self.k = k


class SpectrumViolation(SqlaError, ValueError):
    pass


class FormatError(SqlaError, ValueError):
    """A matrix file is not valid SQM1 or numeric CSV."""
