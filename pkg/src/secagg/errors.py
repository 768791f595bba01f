"""Exception hierarchy shared by all secagg modules."""


class SecAggError(Exception):
    """Base class for every error raised by this package."""


class FieldError(SecAggError, ValueError):
    """Invalid field construction or out-of-field element."""


class MatrixError(SecAggError, ValueError):
    """Shape mismatch, bad index set, or invalid Cauchy parameters."""


class SingularMatrixError(MatrixError):
    """Raised by solve/inverse on a rank-deficient square matrix."""


class ParameterError(SecAggError, ValueError):
    """Session parameters violate a structural precondition."""


class InfeasibleError(ParameterError):
    """U <= T: no scheme can be both correct and secure.

    The optimal rate region is empty whenever the response threshold does
    not exceed the collusion threshold, so construction is refused outright.
    """


class ProtocolError(SecAggError):
    """A protocol machine received inconsistent or missing messages."""


class ScheduleError(ProtocolError, ValueError):
    """Dropout schedule violates U2 <= U1 or |U2| >= U."""


class ReuseError(ProtocolError):
    """A dealer output was offered to a second session."""


class BudgetExceededError(SecAggError):
    """Exhaustive enumeration would exceed the configured budget."""


class FormatError(SecAggError, ValueError):
    """Malformed binary or text artifact."""
