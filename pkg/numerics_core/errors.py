"""Exceptions shared by the numerical packages."""


class NumericalError(RuntimeError):
    """Raised when a computation cannot produce a trustworthy result.

    Precondition violations (bad shapes, out-of-range arguments) raise
    ``ValueError`` instead; this class is reserved for failures that depend
    on the numbers themselves, e.g. an ill-conditioned eigenbasis.
    """
