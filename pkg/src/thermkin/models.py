"""Concrete relaxation models and their closed-form companions.

Three bath-coupled systems: the thermal qubit (fully analytic), the damped
harmonic oscillator (analytic occupation/fidelity, numeric kinematics), and
a harmonically trapped quantum Brownian particle with a single jump
operator built from the position and momentum quadratures.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .lindblad import GKSLModel
from .states import (
    HilbertSpec,
    OperatorMatrix,
    bose_einstein,
    bose_einstein_temperature,
    DEFAULT_TAIL_TOL,
    fock_dim_for_tail,
    fock_space,
    ladder_operators,
    position_momentum,
    qubit_space,
    thermal_state,
)

CL_REGIME_FACTOR = 10.0  # T and Lambda must exceed the trap scale by this


# ---------------------------------------------------------------------------
# thermal qubit

def qubit_model(omega: float, gamma: float, temperature: float) -> GKSLModel:
    """Two-level system exchanging quanta with a bath at the given T.

    Absorption runs at gamma*nbar, emission at gamma*(nbar+1); the
    population sub-block of the generator is the standard two-state rate
    matrix.
    """
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    nbar = bose_einstein(omega, temperature)
    space = qubit_space(omega)
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    raise_ = lower.conj().T
    H = OperatorMatrix(space, np.diag([0.0, omega]).astype(complex), "H")
    jumps = (
        OperatorMatrix(space, np.sqrt(gamma * nbar) * raise_, "absorb"),
        OperatorMatrix(space, np.sqrt(gamma * (nbar + 1.0)) * lower, "emit"),
    )
    meta = {"family": "qubit", "omega": omega, "gamma": gamma,
            "temperature": temperature, "nbar": nbar}
    return GKSLModel(space, H, jumps, meta)


def qubit_total_rate(omega: float, gamma: float, beta: float) -> float:
    """Relaxation rate gamma*(1 + 2 nbar) = gamma*coth(omega*beta/2)."""
    return gamma / np.tanh(0.5 * omega * beta)


def qubit_overlap(beta0: float, beta: float, omega: float) -> float:
    """Weight of the decaying mode in a thermal state at beta0 (bath beta)."""
    x0, x = np.exp(-beta0 * omega), np.exp(-beta * omega)
    return (x - x0) / ((1.0 + x0) * (1.0 + x))


def qubit_overlap_asymptote(beta: float, omega: float) -> float:
    """Large-detuning bound tanh(omega*beta/2)/2 on |overlap|."""
    return 0.5 * np.tanh(0.5 * omega * beta)


def qubit_pair_fidelity(beta1: float, beta2: float, omega: float) -> float:
    """Fidelity of two thermal qubit states (closed form)."""
    x1, x2 = np.exp(-beta1 * omega), np.exp(-beta2 * omega)
    return (1.0 + np.sqrt(x1 * x2)) / np.sqrt((1.0 + x1) * (1.0 + x2))


def qubit_exact_state(t: float, beta0: float, beta: float, omega: float,
                      gamma: float):
    """Exact relaxing state: thermal(beta) plus the decaying population mode."""
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    rate = qubit_total_rate(omega, gamma, beta)
    x = np.exp(-beta * omega)
    xi = qubit_overlap(beta0, beta, omega)
    p0 = 1.0 / (1.0 + x) + xi * np.exp(-rate * t)
    from .states import DensityMatrix  # local import avoids cycle at module load
    return DensityMatrix(qubit_space(omega), np.diag([p0, 1.0 - p0]).astype(complex))


def qubit_time_to_population_gap(delta_rho: float, beta0: float, beta: float,
                                 omega: float, gamma: float) -> float:
    """Time at which the ground-population excess equals delta_rho."""
    xi = qubit_overlap(beta0, beta, omega)
    if xi == 0.0 or delta_rho / xi <= 0:
        raise DomainError("population gap not reachable from this initial state")
    return np.log(xi / delta_rho) / qubit_total_rate(omega, gamma, beta)


@dataclass(frozen=True)
class QubitClosedForms:
    """Closed-form kinematics record of the relaxing thermal qubit at time t.

    The statistical length is the antiderivative of the closed-form
    velocity, i.e. [arctan g(kappa(t)) - arctan g(kappa(0))]/2 with
    g(u) = ((e^{omega beta} - 1) u - 2) / (2 sqrt((e^{omega beta} u - 1)(u + 1))),
    evaluated with the signed argument.
    """

    t: float
    beta0: float
    beta: float
    omega: float
    gamma: float
    total_rate: float
    xi: float
    xi_asym: float
    kappa: float
    F_thermal_pair: float
    F_time: float
    I_Q: float
    v: float
    length: float
    degenerate: bool


def _qubit_kappa(t, beta0, beta, omega, gamma):
    xi = qubit_overlap(beta0, beta, omega)
    rate = qubit_total_rate(omega, gamma, beta)
    return -np.exp(rate * t) / ((np.exp(beta * omega) + 1.0) * xi)


def _qubit_arctan_argument(u, beta, omega):
    eb = np.exp(beta * omega)
    return ((eb - 1.0) * u - 2.0) / (2.0 * np.sqrt((eb * u - 1.0) * (u + 1.0)))


def qubit_closed_forms(t: float, beta0: float, beta: float, omega: float,
                       gamma: float) -> QubitClosedForms:
    """Evaluate the full analytic suite for the relaxing thermal qubit."""
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    rate = qubit_total_rate(omega, gamma, beta)
    xi = qubit_overlap(beta0, beta, omega)
    xi_asym = qubit_overlap_asymptote(beta, omega)
    f_pair = qubit_pair_fidelity(beta0, beta, omega)

    eb, eb0 = np.exp(beta * omega), np.exp(beta0 * omega)
    decay = -np.expm1(-rate * t)  # 1 - e^{-rate t}
    A = decay * (eb - eb0) / (1.0 + eb)
    f_time = ((np.sqrt(eb * (eb0 + A)) + np.sqrt(1.0 - A))
              / np.sqrt((1.0 + eb) * (1.0 + eb0)))

    if xi == 0.0:
        return QubitClosedForms(t, beta0, beta, omega, gamma, rate, 0.0,
                                xi_asym, np.inf, f_pair, f_time, 0.0, 0.0,
                                0.0, degenerate=True)

    kap = _qubit_kappa(t, beta0, beta, omega, gamma)
    quad = (eb * kap - 1.0) * (kap + 1.0)
    iq = rate ** 2 / quad
    v = 0.5 * rate / np.sqrt(quad)
    kap0 = _qubit_kappa(0.0, beta0, beta, omega, gamma)
    length = 0.5 * (np.arctan(_qubit_arctan_argument(kap, beta, omega))
                    - np.arctan(_qubit_arctan_argument(kap0, beta, omega)))
    return QubitClosedForms(t, beta0, beta, omega, gamma, rate, xi, xi_asym,
                            kap, f_pair, f_time, iq, v, length,
                            degenerate=False)


def qubit_linear_response_coefficient(omega: float, temperature: float) -> float:
    """Quadratic coefficient of 1 - F for a small temperature offset."""
    eb = np.exp(omega / temperature)
    return eb / (8.0 * (1.0 + eb) ** 2) * (omega / temperature ** 2) ** 2


# ---------------------------------------------------------------------------
# damped harmonic oscillator

def ho_model(dim: int, omega: float, gamma: float, nbar: float,
             tail_tol: float = DEFAULT_TAIL_TOL) -> GKSLModel:
    """Single bosonic mode exchanging quanta with a thermal bath.

    Jump operators sqrt(gamma nbar) a_dag and sqrt(gamma (nbar+1)) a; the
    stationary state is the truncated thermal state at the bath occupation.
    """
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    if nbar < 0:
        raise DomainError(f"nbar must be >= 0, got {nbar}")
    space = fock_space(dim, omega)
    if nbar > 0:
        beta = 1.0 / bose_einstein_temperature(omega, nbar)
        thermal_state(space, beta, tail_tol)  # raises with a dim hint if too small
    a, ad = ladder_operators(space)
    H = OperatorMatrix(space, omega * (ad.entries @ a.entries), "H")
    jumps = []
    if nbar > 0:
        jumps.append(OperatorMatrix(space, np.sqrt(gamma * nbar) * ad.entries,
                                    "absorb"))
    jumps.append(OperatorMatrix(space, np.sqrt(gamma * (nbar + 1.0)) * a.entries,
                                "emit"))
    meta = {"family": "ho", "omega": omega, "gamma": gamma, "nbar": nbar}
    return GKSLModel(space, H, tuple(jumps), meta)


def ho_moment_solution(t, n0: float, nbar: float, rate: float):
    """Mean occupation after a quench: n0 e^{-rate t} + nbar (1 - e^{-rate t}).

    The rate is taken as given (recorded by the caller); for the jump
    operators of ho_model the occupation relaxes at the bare coupling gamma.
    """
    t = np.asarray(t, dtype=float)
    decay = np.exp(-rate * t)
    return n0 * decay + nbar * (1.0 - decay)


def ho_fidelity_analytic(n_t: float, nbar: float) -> float:
    """Fidelity between thermal states with occupations n_t and nbar."""
    if n_t < 0 or nbar < 0:
        raise DomainError("occupations must be >= 0")
    return 1.0 / (np.sqrt((1.0 + n_t) * (1.0 + nbar)) - np.sqrt(n_t * nbar))


# ---------------------------------------------------------------------------
# trapped quantum Brownian particle

@dataclass(frozen=True)
class QBMParams:
    """Trap and bath parameters of the Brownian particle model.

    cl_regime records whether the bath temperature and the spectral cutoff
    both dominate the trap frequency (each by a factor of ten); outside
    that window the single-jump description is a stretch and a warning is
    issued at model build time.
    """

    mass: float
    omega_trap: float
    lambda_cutoff: float
    zeta: float
    temperature: float
    cl_regime: bool = field(init=False)

    def __post_init__(self):
        for name in ("mass", "omega_trap", "lambda_cutoff", "zeta", "temperature"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        ok = (self.temperature >= CL_REGIME_FACTOR * self.omega_trap
              and self.lambda_cutoff >= CL_REGIME_FACTOR * self.omega_trap)
        object.__setattr__(self, "cl_regime", bool(ok))

    def jump_coefficients(self):
        """(alpha, beta) with L = alpha*x + beta*p."""
        alpha = np.sqrt(2.0 * self.mass * self.zeta * self.temperature)
        beta = (self.zeta / alpha) * (-self.temperature / self.lambda_cutoff + 0.5j)
        return alpha, beta


def qbm_model(dim: int, params: QBMParams,
              tail_tol: float = DEFAULT_TAIL_TOL) -> GKSLModel:
    """Brownian particle in a harmonic trap with one quadrature jump operator."""
    space = fock_space(dim, params.omega_trap)
    beta_inv = 1.0 / params.temperature
    nbar = bose_einstein(params.omega_trap, params.temperature)
    if nbar > 0:
        thermal_state(space, beta_inv, tail_tol)  # dim check with hint
    if not params.cl_regime:
        warnings.warn(
            f"QBM outside its validity regime: T={params.temperature:g}, "
            f"Lambda={params.lambda_cutoff:g} vs trap {params.omega_trap:g}",
            RuntimeWarning,
            stacklevel=2,
        )
    x, p = position_momentum(space, params.mass)
    H = (p.entries @ p.entries) / (2.0 * params.mass) \
        + 0.5 * params.mass * params.omega_trap ** 2 * (x.entries @ x.entries)
    alpha, beta = params.jump_coefficients()
    L = OperatorMatrix(space, alpha * x.entries + beta * p.entries, "L")
    meta = {"family": "qbm", "mass": params.mass,
            "omega_trap": params.omega_trap,
            "lambda_cutoff": params.lambda_cutoff, "zeta": params.zeta,
            "temperature": params.temperature, "nbar": nbar,
            "alpha": alpha, "beta": beta, "cl_regime": params.cl_regime}
    return GKSLModel(space, OperatorMatrix(space, H, "H"), (L,), meta)


def required_fock_dim(nbar: float, tail_tol: float = DEFAULT_TAIL_TOL) -> int:
    """Smallest truncation whose thermal tail at nbar passes tail_tol."""
    if nbar <= 0:
        return 2
    temperature = bose_einstein_temperature(1.0, nbar)
    return fock_dim_for_tail(1.0 / temperature, 1.0, tail_tol)
