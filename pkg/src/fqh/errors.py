"""Exception hierarchy shared by all fqh modules."""


class FqhError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(FqhError):
    """An input violates a documented contract (CLI exit code 2)."""


class ParseError(FqhError):
    """A problem file could not be parsed (CLI exit code 2)."""


class NonHermitian(ValidationError):
    """Matrix is not Hermitian within its tolerance."""


class NotPSD(ValidationError):
    """Operator has an eigenvalue below the negative tolerance."""


class DimensionMismatch(ValidationError):
    """Operands act on spaces of different dimension."""


class IncompleteBasis(ValidationError):
    """A vector family fails to be orthonormal and resolve the identity."""


class BasisNotEigen(ValidationError):
    """A supplied basis does not diagonalize the state."""


class UnknownLabel(ValidationError):
    """Outcome label not present in the instrument."""


class EmptyDistribution(ValidationError):
    """Sampling from a distribution with no entries."""


class NoDegenerateBlock(ValidationError):
    """Sweep requested on a state without a two-dimensional degenerate cluster."""


class NoConvergence(FqhError):
    """Iterative eigensolver exceeded its sweep budget (CLI exit code 3)."""
