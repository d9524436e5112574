"""Exception hierarchy.

Configuration problems (bad keys, malformed values) and numerical problems
(invariant violations, solver breakdowns) are kept on separate branches so
the CLI can map them to distinct exit codes.
"""


class ThermkinError(Exception):
    """Base class for all package errors."""


class ConfigError(ThermkinError):
    """Invalid run configuration (unknown key, missing value, bad range)."""


class NumericalError(ThermkinError):
    """Base class for numerical/physical failures."""


class DomainError(NumericalError):
    """Argument outside the mathematical domain of an operation."""


class ShapeError(NumericalError):
    """Operands defined on mismatched spaces or with wrong dimensions."""


class UnsupportedSpaceError(NumericalError):
    """Operation requested on a Hilbert space kind that cannot support it."""


class StateInvariantError(NumericalError):
    """A density matrix failed Hermiticity/trace/positivity validation."""


class TruncationOverflowError(NumericalError):
    """Too much thermal weight beyond the truncated Fock space.

    Carries a hint with the smallest dimension that would pass the check.
    """

    def __init__(self, message, required_dim=None):
        super().__init__(message)
        self.required_dim = required_dim


class DegenerateSpectrumError(NumericalError):
    """More than one eigenvalue indistinguishable from zero."""


class NonDiagonalizableError(NumericalError):
    """Left/right eigenpairing or biorthonormalization broke down."""


class StiffnessError(NumericalError):
    """Explicit integrator cannot resolve the fastest decay scales."""


class AccuracyError(NumericalError):
    """Integrator output violated state invariants beyond repair tolerance."""


class QuadratureError(NumericalError):
    """Path-length quadrature failed to converge on the available grid."""


class NoEquidistantStateError(NumericalError):
    """The equidistance residual has no root on the search bracket."""
