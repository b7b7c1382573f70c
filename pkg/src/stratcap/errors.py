"""Exception hierarchy shared by every module."""


class StratcapError(Exception):
    """Base class for library errors."""


class InvalidArgument(StratcapError, ValueError):
    """A precondition on an argument was violated."""


class UnsupportedParameter(InvalidArgument):
    """The requested parameter combination has no implementation."""


class ResourceLimitError(StratcapError):
    """A size cap (node count, family size) would be exceeded."""


class NumericError(StratcapError, ArithmeticError):
    """Eigensolver or quadrature failure."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SingularMultiplierError(NumericError):
    """A spectral multiplier is not finite on a retained eigenvalue."""

    def __init__(self, index, eigenvalue):
        super().__init__(
            f"multiplier is not finite at mode {index} (eigenvalue {eigenvalue!r})"
        )
        self.index = index
        self.eigenvalue = eigenvalue


class ZeroModeError(InvalidArgument):
    """A multiplier singular at zero was requested on an operator with a kernel."""


class ConsistencyFailure(StratcapError):
    """Two independent routes to the same quantity disagree."""


class CertificationFailure(StratcapError):
    """A bound certification found a violation (e.g. nonpositive kernel)."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class EquivalenceFailure(StratcapError):
    """One seminorm is infinite where its partner is finite."""

    def __init__(self, message, function_id=None):
        super().__init__(message)
        self.function_id = function_id


class ResolutionWarning(UserWarning):
    """An operation was skipped because the grid cannot resolve its scale."""
