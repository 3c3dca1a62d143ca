"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, any
NumericalConsistencyError (or PrecisionLossError) -> 3.
"""


class SpinbathError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SpinbathError):
    """Invalid run configuration or malformed config file."""


class ShapeMismatchError(SpinbathError):
    """Operands live in different Hilbert-space layouts."""


class CapacityError(SpinbathError):
    """Requested dimension exceeds a documented dense/storage ceiling."""


class ZeroNormError(SpinbathError):
    """A state with (numerically) zero norm cannot be normalized."""


class NumericalConsistencyError(SpinbathError):
    """A quantity violated a hard numerical invariant (Hermiticity, trace, ...)."""


class SpectralWindowError(NumericalConsistencyError):
    """Chebyshev recurrence diverged: the spectral window does not cover the
    operator spectrum.  Re-estimate the bounds with more Lanczos iterations
    or a larger safety factor."""


class ConvergenceError(NumericalConsistencyError):
    """An iterative solver (Lanczos) failed to reach its tolerance."""


class PrecisionLossError(SpinbathError):
    """Imaginary-time weights underflowed; for beta -> inf use the Lanczos
    ground-state preparation instead."""


class BasisError(SpinbathError):
    """Operation received a reduced density matrix in the wrong basis."""


class UndefinedBetaError(NumericalConsistencyError):
    """Effective inverse temperature is undefined (all level pairs degenerate
    or excluded)."""
