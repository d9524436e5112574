"""Information-geometry measures over states and trajectories.

Fidelity F = Tr sqrt(sqrt(rho) sigma sqrt(rho)), Bures distance
sqrt(2(1-F)), Fisher information with respect to time through the symmetric
logarithmic derivative, and the derived path quantities: statistical
velocity v = sqrt(I_Q)/2, cumulative statistical length, and the degree of
completion (length normalized by its value at the final time).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalError, QuadratureError, ShapeError
from .lindblad import GKSLModel, Trajectory, apply_generator
from .states import DensityMatrix

FIDELITY_PSD_TOL = 1e-10
SLD_CUTOFF = 1e-12
QUAD_REL_TOL = 1e-6
DEGENERATE_LENGTH = 1e-12


def _state_pair(rho, sigma):
    if isinstance(rho, DensityMatrix) and isinstance(sigma, DensityMatrix):
        if rho.space != sigma.space:
            raise ShapeError("states live on different spaces")
    a = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    b = sigma.entries if isinstance(sigma, DensityMatrix) else np.asarray(sigma, dtype=complex)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def _checked_sqrt_eigvals(vals, what):
    low = vals.min()
    if low < -FIDELITY_PSD_TOL:
        raise NumericalError(f"{what}: negative eigenvalue {low:.3e}")
    return np.sqrt(np.clip(vals, 0.0, None))


def fidelity(rho, sigma) -> float:
    """State fidelity in [0, 1].

    Diagonal pairs take the exact sum(sqrt(p*q)) route, which keeps full
    precision 1 - F ~ 1e-12 resolvable; the general case goes through two
    Hermitian eigensolves.
    """
    a, b = _state_pair(rho, sigma)
    off = max(np.abs(a - np.diag(np.diag(a))).max(),
              np.abs(b - np.diag(np.diag(b))).max())
    if off < 1e-13:
        p = np.clip(np.diag(a).real, 0.0, None)
        q = np.clip(np.diag(b).real, 0.0, None)
        return float(min(np.sqrt(p * q).sum(), 1.0))
    vals, vecs = np.linalg.eigh(0.5 * (a + a.conj().T))
    sq = _checked_sqrt_eigvals(vals, "fidelity: first argument")
    root = (vecs * sq) @ vecs.conj().T
    inner = root @ (0.5 * (b + b.conj().T)) @ root
    ivals = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    f = _checked_sqrt_eigvals(ivals, "fidelity: inner product").sum()
    return float(min(f, 1.0))


def fidelity_deficit(rho, sigma) -> float:
    """1 - F, computed without cancellation where possible.

    For diagonal pairs 1 - sum sqrt(p q) = sum (sqrt(p) - sqrt(q))^2 / 2,
    which stays accurate down to deficits of order 1e-30; the general case
    falls back to 1 - fidelity and is limited to ~1e-16 resolution.
    """
    a, b = _state_pair(rho, sigma)
    off = max(np.abs(a - np.diag(np.diag(a))).max(),
              np.abs(b - np.diag(np.diag(b))).max())
    if off < 1e-13:
        p = np.clip(np.diag(a).real, 0.0, None)
        q = np.clip(np.diag(b).real, 0.0, None)
        return float(0.5 * np.sum((np.sqrt(p) - np.sqrt(q)) ** 2))
    return max(1.0 - fidelity(rho, sigma), 0.0)


def bures_distance(rho, sigma) -> float:
    """Bures distance sqrt(2 (1 - F))."""
    return float(np.sqrt(2.0 * fidelity_deficit(rho, sigma)))


def sld(rho, drho, cutoff: float = SLD_CUTOFF) -> np.ndarray:
    """Symmetric logarithmic derivative solving drho = (L rho + rho L)/2.

    Built in the eigenbasis of rho; matrix elements whose eigenvalue sums
    fall below cutoff (relative to the largest eigenvalue) are dropped,
    restricting the operator to the numerical support of the state.
    """
    a = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    d = np.asarray(drho, dtype=complex)
    if d.shape != a.shape:
        raise ShapeError(f"drho shape {d.shape} vs state {a.shape}")
    scale = max(np.abs(d).max(), 1e-300)
    if np.abs(d - d.conj().T).max() > 1e-10 * max(1.0, scale):
        raise DomainError("drho is not Hermitian")
    if abs(d.trace()) > 1e-10 * max(1.0, scale):
        raise DomainError("drho is not traceless")
    vals, vecs = np.linalg.eigh(0.5 * (a + a.conj().T))
    dt = vecs.conj().T @ d @ vecs
    denom = vals[:, None] + vals[None, :]
    keep = denom > cutoff * max(vals.max(), 1e-300)
    elems = np.where(keep, 2.0 * dt / np.where(keep, denom, 1.0), 0.0)
    return vecs @ elems @ vecs.conj().T


def qfi(rho, drho, cutoff: float = SLD_CUTOFF) -> float:
    """Fisher information Tr(L^2 rho) of the time parameter."""
    a = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    d = np.asarray(drho, dtype=complex)
    if d.shape != a.shape:
        raise ShapeError(f"drho shape {d.shape} vs state {a.shape}")
    scale = max(np.abs(d).max(), 1e-300)
    if np.abs(d - d.conj().T).max() > 1e-10 * max(1.0, scale):
        raise DomainError("drho is not Hermitian")
    vals, vecs = np.linalg.eigh(0.5 * (a + a.conj().T))
    dt = vecs.conj().T @ d @ vecs
    denom = vals[:, None] + vals[None, :]
    keep = denom > cutoff * max(vals.max(), 1e-300)
    elems = np.where(keep, 2.0 * dt / np.where(keep, denom, 1.0), 0.0)
    # Tr(L^2 rho) in the eigenbasis: sum_ij |L_ij|^2 lambda_i
    return float(np.sum((elems.real ** 2 + elems.imag ** 2) * vals[:, None]))


def statistical_velocity(rho, drho, cutoff: float = SLD_CUTOFF) -> float:
    return 0.5 * np.sqrt(max(qfi(rho, drho, cutoff), 0.0))


def dyadic_refinement_times(grid, levels: int) -> np.ndarray:
    """Midpoint-refinement times of a grid, `levels` doublings deep.

    Returned times are exactly reproducible (pure dyadic arithmetic), so a
    stiff trajectory evolved with these as aux_times can serve quadrature
    lookups without interpolation.
    """
    grid = np.asarray(grid, dtype=float)
    out = []
    m = 2 ** levels
    frac = np.arange(1, m) / m
    for a, b in zip(grid[:-1], grid[1:]):
        out.append(a + (b - a) * frac)
    return np.concatenate(out) if out else np.array([])


@dataclass(frozen=True)
class KinematicsRecord:
    """Per-time thermal-kinematics measures along one trajectory.

    completion is None when the path is degenerate (zero total length).
    """

    times: np.ndarray
    fidelity_to_target: np.ndarray
    qfi: np.ndarray
    velocity: np.ndarray
    length: np.ndarray
    completion: object  # ndarray, or None on a degenerate path
    degenerate: bool = False
    diagnostics: dict = field(default_factory=dict, compare=False)

    def time_to_completion(self, threshold: float) -> float:
        """First time the degree of completion reaches threshold (inf if never)."""
        if self.degenerate:
            return float("nan")
        phi = self.completion
        if phi[-1] < threshold:
            return float("inf")
        k = int(np.argmax(phi >= threshold))
        if k == 0 or phi[k] == threshold:
            return float(self.times[k])
        t0, t1 = self.times[k - 1], self.times[k]
        p0, p1 = phi[k - 1], phi[k]
        return float(t0 + (threshold - p0) * (t1 - t0) / (p1 - p0))


class _VelocityEvaluator:
    """Cached v(t) lookups; grid times are pre-seeded from validated states."""

    def __init__(self, traj, model, cutoff):
        self.traj = traj
        self.model = model
        self.cutoff = cutoff
        self.cache = {}

    def seed(self, t, value):
        self.cache[round(float(t), 12)] = value

    def __call__(self, t):
        key = round(float(t), 12)
        if key not in self.cache:
            rho = self.traj.state_matrix(t)
            self.cache[key] = statistical_velocity(
                rho, apply_generator(self.model, rho), self.cutoff)
        return self.cache[key]


def kinematics(traj: Trajectory, model: GKSLModel, target: DensityMatrix,
               t_fin: float = None, sld_cutoff: float = SLD_CUTOFF,
               quad_rel_tol: float = QUAD_REL_TOL,
               max_levels: int = 3) -> KinematicsRecord:
    """Kinematics record over a trajectory.

    d(rho)/dt comes from the generator (never from finite differences);
    the cumulative length uses composite Simpson quadrature per grid
    interval, with the panel count doubled until the total length changes
    by less than quad_rel_tol.
    """
    times = np.asarray(traj.times, dtype=float)
    if t_fin is None:
        t_fin = times[-1]
    if t_fin > times[-1] + 1e-12:
        raise DomainError(f"trajectory ends at {times[-1]}, before t_fin={t_fin}")
    mask = times <= t_fin + 1e-12
    times = times[mask]

    kept_states = [s for s, keep in zip(traj.states, mask) if keep]
    fids = np.empty(len(times))
    qfis = np.empty(len(times))
    for k, state in enumerate(kept_states):
        fids[k] = fidelity(state, target)
        qfis[k] = qfi(state, apply_generator(model, state), sld_cutoff)
    vels = 0.5 * np.sqrt(np.clip(qfis, 0.0, None))

    v = _VelocityEvaluator(traj, model, sld_cutoff)
    for t, val in zip(times, vels):
        v.seed(t, val)

    lengths, level = _cumulative_simpson(v, times, quad_rel_tol, max_levels)
    total = lengths[-1]
    degenerate = total <= DEGENERATE_LENGTH
    completion = None if degenerate else lengths / total
    diag = {"quad_levels": level, "total_length": float(total)}
    return KinematicsRecord(times, fids, qfis, vels, lengths, completion,
                            degenerate, diag)


def _cumulative_simpson(v, times, rel_tol, max_levels):
    """Cumulative integral of v on `times`, refined by panel doubling."""
    n_int = len(times) - 1
    prev = None
    for level in range(max_levels + 1):
        m = 2 ** level  # Simpson panels per grid interval
        seg = np.empty(n_int)
        for i in range(n_int):
            a, b = times[i], times[i + 1]
            frac = np.arange(2 * m + 1) / (2 * m)
            pts = a + (b - a) * frac
            vals = np.array([v(t) for t in pts])
            h = (b - a) / (2 * m)
            seg[i] = h / 3.0 * (vals[0] + vals[-1] + 4 * vals[1::2].sum()
                                + 2 * vals[2:-1:2].sum())
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        if prev is not None:
            tot = max(cum[-1], DEGENERATE_LENGTH)
            if np.abs(cum - prev).max() <= rel_tol * tot:
                return cum, level
        prev = cum
    if cum[-1] <= DEGENERATE_LENGTH:
        return cum, max_levels  # flat path: nothing left to resolve
    raise QuadratureError(
        f"length quadrature did not converge to {rel_tol:.1e} within "
        f"{max_levels} doublings; rerun with ~{2 * (len(times) - 1) * 2 ** max_levels} "
        f"output points"
    )