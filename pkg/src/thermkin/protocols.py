"""Heating/cooling experiment orchestration.

Protocols quench a thermally prepared system into a bath at a different
temperature and track fidelity to the target plus the thermal-kinematics
measures. Three experiment shapes:

  * two-temperature: heat C->H vs cool H->C, compared by statistical
    velocity and degree of completion;
  * three-temperature (forward): relax from H and from C into a warm bath
    W whose thermal state is fidelity-equidistant from both initial states;
  * three-temperature (backward): prepare at W and relax into H and into C.

Also here: the equidistant-cold-temperature solver, the near-equilibrium
quadratic-fidelity sweep, and the spectrum report with initial-state
overlaps.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DomainError, NoEquidistantStateError
from .lindblad import (
    GKSLModel,
    evolve,
    population_superoperator,
    to_superoperator,
)
from .metrics import (
    KinematicsRecord,
    fidelity,
    kinematics,
    QUAD_REL_TOL,
    SLD_CUTOFF,
)
from .models import QBMParams, ho_model, qbm_model, qubit_model
from .spectra import spectral_decompose, overlaps
from .states import (
    DEFAULT_TAIL_TOL,
    DensityMatrix,
    bose_einstein,
    bose_einstein_temperature,
    thermal_state,
)

FIDELITY_THRESHOLDS = (0.9, 0.99, 0.999)
COMPLETION_THRESHOLD = 0.9
CONVERGED_FIDELITY = 0.999
EQUIDIST_TOL = 1e-10
BISECTION_FLOOR_FACTOR = 1e-3

THREE_T_FORWARD = "three_temperature_forward"
THREE_T_BACKWARD = "three_temperature_backward"
TWO_T = "two_temperature"


def thread_budget() -> int:
    raw = os.environ.get("THERMKIN_THREADS", "")
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise ConfigError(f"THERMKIN_THREADS must be an integer: {raw!r}") from exc
        if n < 1:
            raise ConfigError("THERMKIN_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class FamilyConfig:
    """Which system to drive, and its non-thermal parameters."""

    family: str                   # "qubit" | "ho" | "qbm"
    omega: float = 1.0            # qubit / oscillator frequency
    gamma: float = 0.1            # qubit / oscillator coupling
    dim: int = 150                # Fock truncation
    mass: float = 1.0             # Brownian particle
    omega_trap: float = 1e-3
    lambda_cutoff: float = 1.0
    zeta: float = 0.1
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        if self.family not in ("qubit", "ho", "qbm"):
            raise ConfigError(f"unknown model family {self.family!r}")

    @property
    def mode_frequency(self) -> float:
        return self.omega_trap if self.family == "qbm" else self.omega

    def nbar(self, temperature: float) -> float:
        return bose_einstein(self.mode_frequency, temperature)

    def temperature_for_nbar(self, nbar: float) -> float:
        return bose_einstein_temperature(self.mode_frequency, nbar)

    def build_model(self, temperature: float) -> GKSLModel:
        if self.family == "qubit":
            return qubit_model(self.omega, self.gamma, temperature)
        if self.family == "ho":
            return ho_model(self.dim, self.omega, self.gamma,
                            self.nbar(temperature), self.tail_tol)
        params = QBMParams(self.mass, self.omega_trap, self.lambda_cutoff,
                           self.zeta, temperature)
        return qbm_model(self.dim, params, self.tail_tol)

    def thermal(self, temperature: float) -> DensityMatrix:
        space = self.build_space()
        return thermal_state(space, 1.0 / temperature, self.tail_tol)

    def build_space(self):
        from .states import fock_space, qubit_space
        if self.family == "qubit":
            return qubit_space(self.omega)
        return fock_space(self.dim, self.mode_frequency)


@dataclass(frozen=True)
class ProtocolSpec:
    """One heating/cooling experiment."""

    config: FamilyConfig
    protocol: str                 # TWO_T, THREE_T_FORWARD, THREE_T_BACKWARD
    t_final: float
    T_W: float = None
    T_H: float = None
    T_C: float = None
    output_points: int = 201
    rtol: float = 1e-9
    atol: float = 1e-12
    sld_cutoff: float = SLD_CUTOFF
    quad_rel_tol: float = QUAD_REL_TOL
    equidist_tol: float = EQUIDIST_TOL

    def __post_init__(self):
        if self.protocol not in (TWO_T, THREE_T_FORWARD, THREE_T_BACKWARD):
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        if not self.t_final > 0:
            raise ConfigError("t_final must be positive")
        if self.output_points < 9:
            raise ConfigError("output_points must be >= 9")
        if self.protocol == TWO_T:
            if self.T_C is None or self.T_H is None:
                raise ConfigError("two-temperature protocol needs T_C and T_H")
            if not self.T_C < self.T_H:
                raise ConfigError("need T_C < T_H")
        else:
            if self.T_W is None or self.T_H is None:
                raise ConfigError("three-temperature protocol needs T_W and T_H")
            if not self.T_W < self.T_H:
                raise ConfigError("need T_W < T_H")
            if self.T_C is not None and not self.T_C < self.T_W:
                raise ConfigError("need T_C < T_W")


@dataclass(frozen=True)
class BranchResult:
    label: str                    # "heating" or "cooling"
    init_temperature: float
    bath_temperature: float
    trajectory: object
    kinematics: KinematicsRecord
    fidelity_times: dict          # threshold -> first crossing time (inf if never)
    converged: bool               # fidelity to target >= 0.999 at t_final

    @property
    def times(self):
        return self.kinematics.times


@dataclass(frozen=True)
class ProtocolResult:
    spec: ProtocolSpec
    branches: dict                # label -> BranchResult
    equidistance_residual: float
    summary: dict = field(default_factory=dict)


def _first_crossing(times, values, threshold) -> float:
    """First time values reaches threshold, linearly interpolated."""
    above = np.asarray(values) >= threshold
    if not above.any():
        return float("inf")
    k = int(np.argmax(above))
    if k == 0:
        return float(times[0])
    t0, t1 = times[k - 1], times[k]
    v0, v1 = values[k - 1], values[k]
    if v1 == v0:
        return float(t1)
    return float(t0 + (threshold - v0) * (t1 - t0) / (v1 - v0))


def _output_grid(spec: ProtocolSpec) -> np.ndarray:
    """Output times: uniform, except the Brownian particle whose dynamics
    finishes early in the long window; there, half the points resolve the
    first tenth of the span."""
    n = spec.output_points
    if spec.config.family != "qbm":
        return np.linspace(0.0, spec.t_final, n)
    n1 = n // 2
    head = np.linspace(0.0, spec.t_final / 10.0, n1 + 1)
    tail = np.linspace(spec.t_final / 10.0, spec.t_final, n - n1)
    return np.unique(np.concatenate([head, tail]))


def _run_branch(spec: ProtocolSpec, label, T_init, T_bath):
    config = spec.config
    model = config.build_model(T_bath)
    rho0 = config.thermal(T_init)
    target = config.thermal(T_bath)
    grid = _output_grid(spec)

    traj = evolve(model, rho0, grid, rtol=spec.rtol, atol=spec.atol)
    max_levels = 6 if traj.has_dense_output else 1
    kin = kinematics(traj, model, target, sld_cutoff=spec.sld_cutoff,
                     quad_rel_tol=spec.quad_rel_tol, max_levels=max_levels)
    traj.drop_aux()
    f_times = {th: _first_crossing(kin.times, kin.fidelity_to_target, th)
               for th in FIDELITY_THRESHOLDS}
    converged = bool(kin.fidelity_to_target[-1] >= CONVERGED_FIDELITY)
    return BranchResult(label, T_init, T_bath, traj, kin, f_times, converged)


def _run_branches(spec, branch_specs):
    workers = min(len(branch_specs), thread_budget())
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {label: pool.submit(_run_branch, spec, label, Ti, Tb)
                       for label, Ti, Tb in branch_specs}
            return {label: fut.result() for label, fut in futures.items()}
    return {label: _run_branch(spec, label, Ti, Tb)
            for label, Ti, Tb in branch_specs}


def run_two_temperature(spec: ProtocolSpec) -> ProtocolResult:
    """Heating C->H against cooling H->C, compared by completion."""
    if spec.protocol != TWO_T:
        raise ConfigError("spec is not a two-temperature protocol")
    if spec.T_C == spec.T_H:
        raise ConfigError("degenerate two-temperature protocol (T_C == T_H)")
    branches = _run_branches(spec, [
        ("heating", spec.T_C, spec.T_H),
        ("cooling", spec.T_H, spec.T_C),
    ])
    heat, cool = branches["heating"], branches["cooling"]
    summary = _asymmetry_summary(heat, cool)
    xi = abs(qubit_like_overlap_residual(spec))
    return ProtocolResult(spec, branches, equidistance_residual=float("nan"),
                          summary={**summary, "overlap_symmetry_residual": xi})


def qubit_like_overlap_residual(spec: ProtocolSpec) -> float:
    """|xi(T_H, T_C)| - |xi(T_C, T_H)| for the qubit; nan for other families."""
    if spec.config.family != "qubit":
        return float("nan")
    from .models import qubit_overlap
    w = spec.config.omega
    return (abs(qubit_overlap(1 / spec.T_H, 1 / spec.T_C, w))
            - abs(qubit_overlap(1 / spec.T_C, 1 / spec.T_H, w)))


def _asymmetry_summary(heat: BranchResult, cool: BranchResult) -> dict:
    summary = {
        "t_completion_heating": heat.kinematics.time_to_completion(COMPLETION_THRESHOLD),
        "t_completion_cooling": cool.kinematics.time_to_completion(COMPLETION_THRESHOLD),
        "heating_converged": heat.converged,
        "cooling_converged": cool.converged,
    }
    for th, t in heat.fidelity_times.items():
        summary[f"t_fidelity_{th}_heating"] = t
    for th, t in cool.fidelity_times.items():
        summary[f"t_fidelity_{th}_cooling"] = t
    if not (heat.kinematics.degenerate or cool.kinematics.degenerate):
        gap = heat.kinematics.completion - cool.kinematics.completion
        inner = gap[1:-1]
        summary["max_completion_gap"] = float(gap.max())
        summary["min_completion_gap"] = float(gap.min())
        summary["completion_ordering_consistent"] = bool((inner > 0).all())
    else:
        summary["degenerate_path"] = True
    return summary


def solve_equidistant_cold(config: FamilyConfig, T_W: float, T_H: float,
                           tol: float = EQUIDIST_TOL, max_iter: int = 200):
    """Cold temperature whose thermal state matches the hot state's fidelity
    to the warm state. Bisection on (1e-3 T_W, T_W); returns (T_C, residual).
    """
    if not T_H > T_W:
        raise DomainError("need T_H > T_W")
    if not tol > 0:
        raise DomainError("tol must be positive")
    warm = config.thermal(T_W)
    f_ref = fidelity(config.thermal(T_H), warm)

    def residual(tc):
        return fidelity(config.thermal(tc), warm) - f_ref

    lo = BISECTION_FLOOR_FACTOR * T_W
    hi = T_W * (1.0 - 1e-12)
    # fidelity to the warm state must increase toward T_W on the bracket
    probes = [residual(x) for x in np.linspace(lo, hi, 5)]
    if any(b <= a for a, b in zip(probes, probes[1:])):
        raise NoEquidistantStateError(
            "fidelity is not monotonic on the bracket; cannot bisect"
        )
    r_lo, r_hi = probes[0], probes[-1]
    if not (r_lo < 0.0 < r_hi):
        raise NoEquidistantStateError(
            f"no sign change on ({lo:g}, {hi:g}): residuals "
            f"{r_lo:.6e} and {r_hi:.6e} "
            f"(fidelities {r_lo + f_ref:.12f}, {r_hi + f_ref:.12f}; "
            f"target {f_ref:.12f})"
        )
    tc = 0.5 * (lo + hi)
    r = residual(tc)
    for _ in range(max_iter):
        if abs(r) <= tol:
            break
        if r > 0:
            hi = tc
        else:
            lo = tc
        tc = 0.5 * (lo + hi)
        r = residual(tc)
    if abs(r) > tol:
        raise NoEquidistantStateError(
            f"bisection stalled at residual {r:.3e} > tol {tol:.1e}"
        )
    return float(tc), float(r)


def solve_equidistant_warm(config: FamilyConfig, T_C: float, T_H: float,
                           tol: float = EQUIDIST_TOL, max_iter: int = 200):
    """Warm temperature equidistant (in fidelity) from given cold and hot ends."""
    if not T_C < T_H:
        raise DomainError("need T_C < T_H")
    cold = config.thermal(T_C)
    hot = config.thermal(T_H)

    def residual(tw):
        warm = config.thermal(tw)
        return fidelity(cold, warm) - fidelity(hot, warm)

    lo, hi = T_C * (1 + 1e-9), T_H * (1 - 1e-9)
    r_lo, r_hi = residual(lo), residual(hi)
    if not (r_lo > 0.0 > r_hi):
        raise NoEquidistantStateError(
            f"no sign change for warm solve on ({lo:g}, {hi:g})"
        )
    tw = 0.5 * (lo + hi)
    r = residual(tw)
    for _ in range(max_iter):
        if abs(r) <= tol:
            break
        if r > 0:
            lo = tw
        else:
            hi = tw
        tw = 0.5 * (lo + hi)
        r = residual(tw)
    if abs(r) > tol:
        raise NoEquidistantStateError(
            f"warm bisection stalled at residual {r:.3e} > tol {tol:.1e}"
        )
    return float(tw), float(r)


def run_three_temperature(spec: ProtocolSpec) -> ProtocolResult:
    """Forward: H->W and C->W; backward: W->H and W->C.

    In both variants the branch relaxing upward in temperature is labelled
    "heating". T_C is solved for fidelity equidistance when not supplied.
    """
    if spec.protocol not in (THREE_T_FORWARD, THREE_T_BACKWARD):
        raise ConfigError("spec is not a three-temperature protocol")
    config = spec.config
    T_C = spec.T_C
    if T_C is None:
        T_C, _ = solve_equidistant_cold(config, spec.T_W, spec.T_H,
                                        spec.equidist_tol)
        spec = replace(spec, T_C=T_C)
    residual = abs(fidelity(config.thermal(T_C), config.thermal(spec.T_W))
                   - fidelity(config.thermal(spec.T_H), config.thermal(spec.T_W)))

    if spec.protocol == THREE_T_FORWARD:
        branch_specs = [("heating", T_C, spec.T_W), ("cooling", spec.T_H, spec.T_W)]
    else:
        branch_specs = [("heating", spec.T_W, spec.T_H), ("cooling", spec.T_W, T_C)]
    branches = _run_branches(spec, branch_specs)
    summary = _asymmetry_summary(branches["heating"], branches["cooling"])
    summary["variant"] = spec.protocol
    return ProtocolResult(spec, branches, residual, summary)


@dataclass(frozen=True)
class LinearResponseResult:
    delta_t: np.ndarray
    one_minus_f_heating: np.ndarray   # pair (T_W - dT, T_W)
    one_minus_f_cooling: np.ndarray   # pair (T_W + dT, T_W)
    fit_coefficient: float
    closed_form_coefficient: float    # nan for families without one


def linear_response_sweep(config: FamilyConfig, T_W: float,
                          delta_grid) -> LinearResponseResult:
    """Static fidelity-deficit sweep 1 - F(T_W ± dT, T_W) with a quadratic fit.

    The fit is least squares of 1 - F against dT^2 through the origin,
    pooling both branches.
    """
    delta_grid = np.asarray(delta_grid, dtype=float)
    if np.any(delta_grid <= 0):
        raise DomainError("delta grid must be positive offsets")
    if np.any(delta_grid > 0.2 * T_W):
        raise DomainError("delta grid exceeds 0.2*T_W; outside the linear window")
    warm = config.thermal(T_W)
    y_heat = np.array([1.0 - fidelity(config.thermal(T_W - d), warm)
                       for d in delta_grid])
    y_cool = np.array([1.0 - fidelity(config.thermal(T_W + d), warm)
                       for d in delta_grid])
    x = np.concatenate([delta_grid ** 2, delta_grid ** 2])
    y = np.concatenate([y_heat, y_cool])
    denom = float(np.dot(x, x))
    if denom == 0.0:
        raise DomainError("degenerate delta grid")
    coeff = float(np.dot(x, y) / denom)
    if config.family == "qubit":
        from .models import qubit_linear_response_coefficient
        closed = qubit_linear_response_coefficient(config.omega, T_W)
    else:
        closed = float("nan")
    return LinearResponseResult(delta_grid, y_heat, y_cool, coeff, closed)


def near_temperature_divergence(config: FamilyConfig, T_C: float, T_H: float,
                                t_final: float, output_points: int = 161,
                                rtol: float = 1e-9, atol: float = 1e-12) -> dict:
    """Heating/cooling fidelity-curve divergence for a fixed pair of ends.

    Solves the equidistant warm temperature between the given ends, runs the
    forward three-temperature protocol, and reports the sup-norm gap between
    the two fidelity curves normalized by the initial fidelity deficit.
    """
    T_W, _ = solve_equidistant_warm(config, T_C, T_H)
    spec = ProtocolSpec(config, THREE_T_FORWARD, t_final, T_W=T_W, T_H=T_H,
                        T_C=T_C, output_points=output_points, rtol=rtol,
                        atol=atol)
    result = run_three_temperature(spec)
    fh = result.branches["heating"].kinematics.fidelity_to_target
    fc = result.branches["cooling"].kinematics.fidelity_to_target
    f0 = 0.5 * (fh[0] + fc[0])
    gap = float(np.abs(fh - fc).max())
    return {
        "T_W": T_W,
        "initial_fidelity": float(f0),
        "sup_gap": gap,
        "normalized_gap": gap / max(1.0 - f0, 1e-300),
        "result": result,
    }


@dataclass(frozen=True)
class SpectrumReport:
    """Eigenvalues and overlaps for the hot- and cold-bath generators.

    Each bath's generator is decomposed and the overlaps are taken against
    the thermal state at the opposite temperature, i.e. against the initial
    state of the corresponding relaxation.
    """

    rows: tuple      # (bath_label, k, re_lambda, im_lambda, abs_overlap)
    summaries: dict  # bath_label -> {gap, n_slow, mean_decay_rate, slow_mass}


def spectrum_report(config: FamilyConfig, T_hot: float, T_cold: float,
                    slow_window: float = 3.0, bio_tol: float = None) -> SpectrumReport:
    """Spectral tables for the two bath temperatures with swapped initial states."""
    if bio_tol is None:
        # the Brownian-particle eigenbasis is strongly non-normal; its
        # pairwise trace products cannot meet the strict default at useful dims
        bio_tol = 1e-4 if config.family == "qbm" else 1e-8
    rows = []
    summaries = {}
    cases = [("hot", T_hot, T_cold), ("cold", T_cold, T_hot)]
    for label, T_bath, T_init in cases:
        model = config.build_model(T_bath)
        if config.family == "qubit":
            superop = population_superoperator(model)
        else:
            superop = to_superoperator(model)
        decomp = spectral_decompose(superop, bio_tol=bio_tol)
        rho0 = config.thermal(T_init)
        xs = np.abs(overlaps(decomp, rho0))
        lam = decomp.eigenvalues
        for k in range(len(lam)):
            rows.append((label, k + 1, float(lam[k].real), float(lam[k].imag),
                         float(xs[k])))
        gap = decomp.gap
        slow = np.abs(lam.real) <= slow_window * gap
        slow[0] = False
        decaying = np.ones(len(lam), dtype=bool)
        decaying[0] = False
        weight = xs[decaying].sum()
        mean_rate = (float((xs[decaying] * np.abs(lam.real[decaying])).sum() / weight)
                     if weight > 0 else float("nan"))
        summaries[label] = {
            "gap": gap,
            "n_slow": int(slow.sum()),
            "mean_decay_rate": mean_rate,
            "slow_mass": float(xs[slow].sum()),
            "min_re": float(lam.real.min()),
            "bio_tol": bio_tol,
        }
    return SpectrumReport(tuple(rows), summaries)
