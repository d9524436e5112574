"""Thermal kinematics of Markovian open quantum systems.

Library layers:

  states     - truncated Hilbert spaces, operators, thermal states
  lindblad   - GKSL generator, superoperator form, time propagation
  spectra    - biorthonormal spectral decomposition and mode overlaps
  metrics    - fidelity, Bures distance, Fisher information, path kinematics
  models     - thermal qubit, damped oscillator, trapped Brownian particle
  protocols  - heating/cooling experiments and reports
  cli        - `thermkin` command-line front end
"""

__version__ = "0.1.0"

from .errors import (
    AccuracyError,
    ConfigError,
    DegenerateSpectrumError,
    DomainError,
    NoEquidistantStateError,
    NonDiagonalizableError,
    NumericalError,
    QuadratureError,
    ShapeError,
    StateInvariantError,
    StiffnessError,
    ThermkinError,
    TruncationOverflowError,
    UnsupportedSpaceError,
)
from .lindblad import (
    GKSLModel,
    Superoperator,
    Trajectory,
    apply_adjoint,
    apply_generator,
    evolve,
    population_superoperator,
    to_superoperator,
)
from .metrics import (
    KinematicsRecord,
    bures_distance,
    fidelity,
    kinematics,
    qfi,
    sld,
    statistical_velocity,
)
from .models import (
    QBMParams,
    QubitClosedForms,
    ho_fidelity_analytic,
    ho_model,
    ho_moment_solution,
    qbm_model,
    qubit_closed_forms,
    qubit_exact_state,
    qubit_model,
    qubit_overlap,
    qubit_pair_fidelity,
    qubit_total_rate,
)
from .protocols import (
    FamilyConfig,
    ProtocolResult,
    ProtocolSpec,
    linear_response_sweep,
    near_temperature_divergence,
    run_three_temperature,
    run_two_temperature,
    solve_equidistant_cold,
    solve_equidistant_warm,
    spectrum_report,
)
from .spectra import (
    SpectralDecomposition,
    evolve_spectral,
    overlaps,
    spectral_decompose,
)
from .states import (
    BathSpec,
    DensityMatrix,
    HilbertSpec,
    OperatorMatrix,
    bose_einstein,
    bose_einstein_temperature,
    fock_space,
    ladder_operators,
    number_operator,
    position_momentum,
    qubit_space,
    thermal_state,
)
