"""Exception and warning types raised by the simulator."""


class SupercavityError(Exception):
    """Base class for all simulator errors."""


class DomainError(SupercavityError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class PoleError(DomainError):
    """E_k sits on the atomic pole, where the eliminated (beta) form diverges.

    Use the augmented direct solve instead.
    """


class NumericError(SupercavityError, ArithmeticError):
    """A numerical routine failed (singular system, non-convergence, ...)."""

    def __init__(self, message, k=None, diagnostics=None):
        self.reason = message
        if k is not None:
            message = f"{message} (k={k!r})"
        super().__init__(message)
        self.k = k
        self.diagnostics = diagnostics or {}


class DegeneracyError(SupercavityError):
    """No eigenpair qualifies as the atom-dressed level."""


class SplittingNotResolved(SupercavityError):
    """Fewer than two peaks were found where a Rabi doublet was expected."""


class WeakCouplingWarning(UserWarning):
    """eta/xi is not small; the super-cavity picture is only qualitative."""


class ResolutionWarning(UserWarning):
    """A spectral feature is sampled by too few grid points."""
