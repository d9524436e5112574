"""States and operators on truncated Hilbert spaces.

Value types for qubit and Fock-basis systems plus the standard constructors
(ladder operators, quadratures, thermal states, Bose-Einstein occupation).
Units are hbar = k_B = 1 throughout: frequencies and temperatures share
energy units.

All types are immutable after construction and every operation here is a
pure function, so everything is safe to share across workers.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    DomainError,
    ShapeError,
    StateInvariantError,
    TruncationOverflowError,
    UnsupportedSpaceError,
)

# Validation tolerances for density matrices.
HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
# Largest allowed occupation of the top Fock level. The flagship Fock
# configurations (nbar = 10 at dim = 150) sit at ~6.2e-8, so the default
# leaves headroom while still catching undersized bases.
DEFAULT_TAIL_TOL = 1e-7


class SpaceKind(Enum):
    QUBIT = "qubit"
    FOCK = "fock"


@dataclass(frozen=True)
class HilbertSpec:
    """Truncated Hilbert space: a qubit or an N-level Fock ladder.

    omega is the mode (or trap) angular frequency associated with the space;
    it fixes the energy scale of thermal states built on it.
    """

    kind: SpaceKind
    dim: int
    omega: float

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", SpaceKind(self.kind))
        if self.dim < 2:
            raise DomainError(f"dim must be >= 2, got {self.dim}")
        if self.kind is SpaceKind.QUBIT and self.dim != 2:
            raise DomainError("qubit spaces are two-dimensional")
        if not self.omega > 0:
            raise DomainError(f"omega must be positive, got {self.omega}")


def qubit_space(omega: float) -> HilbertSpec:
    return HilbertSpec(SpaceKind.QUBIT, 2, omega)


def fock_space(dim: int, omega: float) -> HilbertSpec:
    return HilbertSpec(SpaceKind.FOCK, dim, omega)


@dataclass(frozen=True)
class OperatorMatrix:
    """A labelled operator on a HilbertSpec."""

    space: HilbertSpec
    entries: np.ndarray
    label: str = ""

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.shape != (self.space.dim, self.space.dim):
            raise ShapeError(
                f"operator {self.label!r} has shape {entries.shape}, "
                f"space dim is {self.space.dim}"
            )
        entries = entries.copy()
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(self.space, self.entries.conj().T, self.label + "^dag")


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite state on a HilbertSpec.

    Construction validates the three state invariants and, for Fock spaces,
    that the top-level occupation is below the truncation tail tolerance.
    Validation never mutates the stored matrix; sub-tolerance negative
    eigenvalues are only clamped inside the diagnostics.
    """

    space: HilbertSpec
    entries: np.ndarray
    tail_tol: float = DEFAULT_TAIL_TOL
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.shape != (self.space.dim, self.space.dim):
            raise ShapeError(
                f"state has shape {entries.shape}, space dim is {self.space.dim}"
            )
        herm_dev = np.abs(entries - entries.conj().T).max()
        if herm_dev > HERMITICITY_TOL:
            raise StateInvariantError(f"not Hermitian: max deviation {herm_dev:.3e}")
        trace_dev = abs(entries.trace() - 1.0)
        if trace_dev > TRACE_TOL:
            raise StateInvariantError(f"trace deviates from 1 by {trace_dev:.3e}")
        eigvals = np.linalg.eigvalsh(0.5 * (entries + entries.conj().T))
        if eigvals.min() < -PSD_TOL:
            raise StateInvariantError(
                f"not positive semidefinite: min eigenvalue {eigvals.min():.3e}"
            )
        tail = float(entries[-1, -1].real)
        if self.space.kind is SpaceKind.FOCK and tail > self.tail_tol:
            raise TruncationOverflowError(
                f"top Fock level holds {tail:.3e} > tail tolerance {self.tail_tol:.1e}",
            )
        entries = entries.copy()
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        diag = dict(self.diagnostics)
        diag.setdefault("min_eigenvalue", float(eigvals.min()))
        diag.setdefault("clamped_min_eigenvalue", float(max(eigvals.min(), 0.0)))
        diag.setdefault("hermiticity_deviation", float(herm_dev))
        diag.setdefault("tail_occupation", tail)
        object.__setattr__(self, "diagnostics", diag)


@dataclass(frozen=True)
class BathSpec:
    """Thermal bath: mode frequency, coupling rate, and temperature.

    Either the temperature or the mean occupation may be given; the other is
    filled in through the Bose-Einstein relation and the original input is
    recorded in `given`.
    """

    omega: float
    gamma: float
    temperature: float
    nbar: float
    given: str  # "temperature" or "nbar"

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if not self.temperature > 0:
            raise DomainError(f"temperature must be positive, got {self.temperature}")
        expected = bose_einstein(self.omega, self.temperature)
        if abs(expected - self.nbar) > 1e-12 * max(1.0, abs(expected)):
            raise DomainError(
                f"nbar {self.nbar} inconsistent with T={self.temperature} "
                f"(expected {expected})"
            )

    @classmethod
    def from_temperature(cls, omega, gamma, temperature):
        return cls(omega, gamma, temperature, bose_einstein(omega, temperature),
                   given="temperature")

    @classmethod
    def from_nbar(cls, omega, gamma, nbar):
        return cls(omega, gamma, bose_einstein_temperature(omega, nbar), nbar,
                   given="nbar")


def bose_einstein(omega: float, temperature: float) -> float:
    """Mean occupation 1/(exp(omega/T) - 1) of a bath mode."""
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    if not temperature > 0:
        raise DomainError(f"temperature must be positive, got {temperature}")
    x = omega / temperature
    if x > 700:  # exp overflow; the occupation is numerically zero
        return np.exp(-x)
    return 1.0 / np.expm1(x)


def bose_einstein_temperature(omega: float, nbar: float) -> float:
    """Invert the occupation relation: T = omega / ln(1 + 1/nbar)."""
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    if not nbar > 0:
        raise DomainError(f"nbar must be positive, got {nbar}")
    return omega / np.log1p(1.0 / nbar)


def ladder_operators(space: HilbertSpec):
    """Annihilation/creation pair on the truncated Fock ladder.

    a|n> = sqrt(n)|n-1>; the creation operator is the conjugate transpose,
    so its action out of the top level is cut off by the truncation.
    """
    if space.kind is not SpaceKind.FOCK:
        raise UnsupportedSpaceError("ladder operators need a Fock space")
    n = np.arange(1, space.dim)
    a = np.zeros((space.dim, space.dim), dtype=complex)
    a[n - 1, n] = np.sqrt(n)
    return (
        OperatorMatrix(space, a, "a"),
        OperatorMatrix(space, a.conj().T, "a_dag"),
    )


def number_operator(space: HilbertSpec) -> OperatorMatrix:
    if space.kind is not SpaceKind.FOCK:
        raise UnsupportedSpaceError("number operator needs a Fock space")
    return OperatorMatrix(space, np.diag(np.arange(space.dim)).astype(complex), "n")


def position_momentum(space: HilbertSpec, mass: float):
    """Quadratures x = (a+a†)/sqrt(2 m omega), p = i sqrt(m omega/2)(a†-a).

    Both are Hermitian by construction; [x, p] = i except in the last
    diagonal entry, which is a truncation artifact.
    """
    if not mass > 0:
        raise DomainError(f"mass must be positive, got {mass}")
    a, ad = ladder_operators(space)
    x = (a.entries + ad.entries) / np.sqrt(2.0 * mass * space.omega)
    p = 1j * np.sqrt(mass * space.omega / 2.0) * (ad.entries - a.entries)
    return OperatorMatrix(space, x, "x"), OperatorMatrix(space, p, "p")


def thermal_occupations(space: HilbertSpec, beta: float) -> np.ndarray:
    """Untruncated Gibbs weights of omega*n (omega two-level splitting for
    qubits), evaluated on the first `dim` levels."""
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    # exp(-beta*omega*n) normalized against the full geometric series; this
    # form stays finite for arbitrarily cold states.
    q = np.exp(-beta * space.omega * np.arange(space.dim))
    if space.kind is SpaceKind.QUBIT:
        return q / q.sum()
    return q * (-np.expm1(-beta * space.omega))


def fock_dim_for_tail(beta: float, omega: float, tail_tol: float) -> int:
    """Smallest dim whose top-level Gibbs weight is below tail_tol."""
    x = beta * omega  # p_n = (1 - e^-x) e^-(n x)
    top = np.log(-np.expm1(-x)) if x < 30 else 0.0
    n_min = (top - np.log(tail_tol)) / x
    return max(2, int(np.ceil(n_min)) + 1)


def thermal_state(space: HilbertSpec, beta: float,
                  tail_tol: float = DEFAULT_TAIL_TOL) -> DensityMatrix:
    """Gibbs state of omega*a†a (Fock) or the two-level splitting (qubit).

    Fock states are renormalized to unit trace after truncation; the
    discarded weight is recorded in the diagnostics. If the untruncated
    weight at the top level exceeds tail_tol the constructor fails with a
    hint for the required dimension.
    """
    p = thermal_occupations(space, beta)
    if space.kind is SpaceKind.FOCK:
        if p[-1] > tail_tol:
            need = fock_dim_for_tail(beta, space.omega, tail_tol)
            raise TruncationOverflowError(
                f"thermal tail {p[-1]:.3e} exceeds {tail_tol:.1e} at dim "
                f"{space.dim}; need dim >= {need}",
                required_dim=need,
            )
        discarded = max(1.0 - p.sum(), 0.0)
    else:
        discarded = 0.0
    p = p / p.sum()
    return DensityMatrix(
        space,
        np.diag(p).astype(complex),
        tail_tol=tail_tol,
        diagnostics={"discarded_mass": float(discarded), "beta": float(beta)},
    )
