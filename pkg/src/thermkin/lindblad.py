"""GKSL generator, superoperator form, and time propagation.

The generator is

    L[rho] = -i[H, rho] + sum_i (L_i rho L_i† - 1/2 {L_i† L_i, rho})

and its adjoint (Heisenberg) map evolves observables. Vectorization uses
column stacking throughout: vec(A X B) = (B^T ⊗ A) vec(X). A reduced
"populations" representation restricted to diagonal states is available for
models whose generator preserves diagonality.

Propagation defaults to adaptive explicit Runge-Kutta integration and falls
back to a sparse implicit (BDF) or superoperator-exponential path for stiff
generators.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .errors import (
    AccuracyError,
    DomainError,
    ShapeError,
    StiffnessError,
)
from .states import DensityMatrix, HilbertSpec, OperatorMatrix, HERMITICITY_TOL

REPAIR_TOL = 1e-8          # max pre-repair trace/Hermiticity deviation
SUPEROP_DIM_WARN = 200     # D above which the D^2 x D^2 matrix gets unwieldy
EXPLICIT_STEP_BUDGET = 40_000

COLUMN_STACKED = "column-stacked"
POPULATIONS = "populations"


@dataclass(frozen=True)
class GKSLModel:
    """Hamiltonian plus jump operators defining a Markovian generator."""

    space: HilbertSpec
    hamiltonian: OperatorMatrix
    jumps: tuple
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "jumps", tuple(self.jumps))
        H = self.hamiltonian.entries
        if self.hamiltonian.space != self.space:
            raise ShapeError("hamiltonian lives on a different space")
        if np.abs(H - H.conj().T).max() > HERMITICITY_TOL:
            raise ShapeError("hamiltonian is not Hermitian")
        for L in self.jumps:
            if L.space != self.space:
                raise ShapeError(f"jump {L.label!r} lives on a different space")


def _as_matrix(state) -> np.ndarray:
    if isinstance(state, DensityMatrix):
        return state.entries
    if isinstance(state, OperatorMatrix):
        return state.entries
    return np.asarray(state, dtype=complex)


def apply_generator(model: GKSLModel, rho) -> np.ndarray:
    """d(rho)/dt for the given state: commutator plus dissipators."""
    rho = _as_matrix(rho)
    H = model.hamiltonian.entries
    if rho.shape != H.shape:
        raise ShapeError(f"state shape {rho.shape} vs space dim {model.space.dim}")
    out = -1j * (H @ rho - rho @ H)
    for L in model.jumps:
        Lm = L.entries
        K = Lm.conj().T @ Lm
        out += Lm @ rho @ Lm.conj().T - 0.5 * (K @ rho + rho @ K)
    return out


def apply_adjoint(model: GKSLModel, obs) -> np.ndarray:
    """Heisenberg-picture derivative of an observable under the dual map."""
    O = _as_matrix(obs)
    H = model.hamiltonian.entries
    if O.shape != H.shape:
        raise ShapeError(f"observable shape {O.shape} vs space dim {model.space.dim}")
    out = 1j * (H @ O - O @ H)
    for L in model.jumps:
        Lm = L.entries
        K = Lm.conj().T @ Lm
        out += Lm.conj().T @ O @ Lm - 0.5 * (O @ K + K @ O)
    return out


def vec(mat: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(mat, dtype=complex).flatten(order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape((dim, dim), order="F")


@dataclass(frozen=True)
class Superoperator:
    """Matrix form of the generator acting on vectorized states.

    representation is "column-stacked" (D^2 x D^2 on vec(rho)) or
    "populations" (D x D on the diagonal of rho, valid only when the
    generator preserves diagonal states).
    """

    space: HilbertSpec
    matrix: np.ndarray
    representation: str = COLUMN_STACKED

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=complex)
        d = self.space.dim
        expected = d * d if self.representation == COLUMN_STACKED else d
        if M.shape != (expected, expected):
            raise ShapeError(
                f"superoperator shape {M.shape}, expected {(expected, expected)}"
            )
        if self.representation == COLUMN_STACKED:
            probe = vec(np.eye(d)) @ M
        else:
            probe = np.ones(d) @ M
        dev = np.abs(probe).max()
        if dev > 1e-10:
            raise ShapeError(f"superoperator is not trace preserving: {dev:.3e}")
        M = M.copy()
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    def apply(self, rho) -> np.ndarray:
        rho = _as_matrix(rho)
        if self.representation == COLUMN_STACKED:
            return unvec(self.matrix @ vec(rho), self.space.dim)
        return np.diag(self.matrix @ np.diag(rho).copy())


def sparse_superoperator(model: GKSLModel) -> sp.csr_matrix:
    """Column-stacked generator as a sparse matrix."""
    d = model.space.dim
    I = sp.identity(d, format="csr", dtype=complex)
    H = sp.csr_matrix(model.hamiltonian.entries)
    M = -1j * (sp.kron(I, H) - sp.kron(H.T, I))
    for L in model.jumps:
        Lm = sp.csr_matrix(L.entries)
        K = (Lm.conj().T @ Lm).tocsr()
        M = M + sp.kron(Lm.conj(), Lm) - 0.5 * sp.kron(I, K) - 0.5 * sp.kron(K.T, I)
    return M.tocsr()


def to_superoperator(model: GKSLModel) -> Superoperator:
    """Dense column-stacked superoperator for the model's generator."""
    d = model.space.dim
    if d > SUPEROP_DIM_WARN:
        warnings.warn(
            f"dim {d} gives a {d * d} x {d * d} superoperator; memory heavy",
            RuntimeWarning,
        )
    return Superoperator(model.space, sparse_superoperator(model).toarray())


def population_superoperator(model: GKSLModel, leak_tol: float = 1e-12) -> Superoperator:
    """Rate-matrix restriction of the generator to diagonal states.

    Only valid when the generator maps diagonal matrices to diagonal
    matrices (thermal qubit, thermal Fock ladder); otherwise raises.
    """
    d = model.space.dim
    W = np.zeros((d, d), dtype=complex)
    for n in range(d):
        basis = np.zeros((d, d), dtype=complex)
        basis[n, n] = 1.0
        out = apply_generator(model, basis)
        leak = np.abs(out - np.diag(np.diag(out))).max()
        if leak > leak_tol:
            raise DomainError(
                f"generator does not preserve populations (leak {leak:.3e})"
            )
        W[:, n] = np.diag(out)
    return Superoperator(model.space, W, representation=POPULATIONS)


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered states of one relaxation run.

    Validated states live on `times`. `state_matrix` additionally evaluates
    off-grid times, either through the integrator's dense output or through
    states stored at the auxiliary times requested from evolve().
    """

    times: np.ndarray
    states: tuple
    model: GKSLModel
    diagnostics: dict = field(default_factory=dict, compare=False)
    _evaluate: object = field(default=None, repr=False, compare=False)
    _aux: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def has_dense_output(self) -> bool:
        return self._evaluate is not None

    def state_matrix(self, t: float) -> np.ndarray:
        """Lightly repaired state at time t (Hermitized, unit trace)."""
        t = float(t)
        rho = None
        if self._aux:
            key = self._aux["index"].get(round(t, 12))
            if key is not None:
                rho = self._aux["fetch"](key)
        if rho is None:
            if self._evaluate is None:
                raise DomainError(
                    f"time {t} not available: trajectory has no dense output and "
                    f"no stored auxiliary state there"
                )
            rho = self._evaluate(t)
        rho = 0.5 * (rho + rho.conj().T)
        return rho / rho.trace().real

    def drop_aux(self):
        """Release bulky auxiliary storage once post-processing is done."""
        self._aux.clear()


def _estimate_fastest_rate(M: sp.spmatrix) -> float:
    """Upper bound on the generator's spectral radius (max abs row sum)."""
    return float(abs(M).sum(axis=1).max())


def _validated_states(model, ys, t_grid, tail_tol, diagnostics):
    states = []
    max_repair = 0.0
    for rho in ys:
        herm_dev = np.abs(rho - rho.conj().T).max()
        trace_dev = abs(rho.trace() - 1.0)
        max_repair = max(max_repair, herm_dev, trace_dev)
        if herm_dev > REPAIR_TOL or trace_dev > REPAIR_TOL:
            raise AccuracyError(
                f"integrator output violates invariants before repair "
                f"(Hermiticity {herm_dev:.3e}, trace {trace_dev:.3e}); "
                f"tighten rtol/atol"
            )
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / rho.trace().real
        states.append(DensityMatrix(model.space, rho, tail_tol=tail_tol))
    diagnostics["max_repair_deviation"] = float(max_repair)
    return tuple(states)


def evolve(model: GKSLModel, rho0: DensityMatrix, t_grid, rtol: float = 1e-9,
           atol: float = 1e-12, method: str = "auto", tail_tol: float = None,
           aux_times=None) -> Trajectory:
    """Integrate d(rho)/dt = L[rho] with dense output at t_grid.

    method:
      "auto"   - explicit Runge-Kutta when the work estimate is affordable,
                 otherwise the shift-invert Krylov propagator.
      "dop853" - force the explicit path (raises StiffnessError on failure).
      "krylov" - shift-invert Arnoldi on the vectorized generator: one
                 sparse LU plus a few dozen solves, then any time is a small
                 matrix exponential. The workhorse for stiff generators.
      "bdf"    - sparse implicit multistep path; dense interpolation is
                 replaced by states stored at aux_times.
      "expm"   - dense superoperator exponential per grid step (small dims).

    aux_times: extra times at which states must later be retrievable via
    Trajectory.state_matrix (quadrature refinement); only consulted by the
    bdf path, the others interpolate anywhere.

    Output states at t_grid are Hermitized and trace-renormalized;
    pre-repair deviations beyond 1e-8 raise AccuracyError.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 2 or np.any(np.diff(t_grid) <= 0):
        raise DomainError("t_grid must be strictly increasing with >= 2 points")
    if rho0.space != model.space:
        raise ShapeError("initial state lives on a different space")
    if tail_tol is None:
        tail_tol = rho0.tail_tol
    d = model.space.dim
    span = t_grid[-1] - t_grid[0]
    M = sparse_superoperator(model)

    if method == "auto":
        est_steps = span * _estimate_fastest_rate(M) / 2.5
        # explicit work scales as steps * d^3; beyond ~qubit scale the
        # Krylov path wins long before step-size stability breaks down
        method = "dop853" if (est_steps <= 2000 or
                              est_steps * d ** 3 < 2e9) else "krylov"

    diagnostics = {"method": method, "rtol": rtol, "atol": atol}

    if method == "expm":
        return _evolve_expm(model, rho0, t_grid, tail_tol, diagnostics)
    if method == "krylov":
        return _evolve_krylov(model, M, rho0, t_grid, tail_tol, diagnostics)

    aux = {}
    if method == "dop853":
        H = model.hamiltonian.entries
        Ls = [L.entries for L in model.jumps]
        Ks = [L.conj().T @ L for L in Ls]

        def rhs(t, y):
            rho = y.reshape(d, d)
            out = -1j * (H @ rho - rho @ H)
            for L, K in zip(Ls, Ks):
                out += L @ rho @ L.conj().T - 0.5 * (K @ rho + rho @ K)
            return out.ravel()

        sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), rho0.entries.ravel(),
                        method="DOP853", t_eval=t_grid, rtol=rtol, atol=atol,
                        dense_output=True)
        if not sol.success:
            raise StiffnessError(
                f"explicit integration failed ({sol.message}); use the "
                f"superoperator-exponential or bdf path"
            )
        ys = [sol.y[:, k].reshape(d, d) for k in range(sol.y.shape[1])]
        dense = sol.sol

        def evaluate(t):
            return dense(t).reshape(d, d)

    elif method == "bdf":
        n2 = d * d
        Mr = sp.bmat([[M.real, -M.imag], [M.imag, M.real]], format="csc")
        v0 = vec(rho0.entries)
        y0 = np.concatenate([v0.real, v0.imag])
        t_eval = t_grid
        if aux_times is not None and len(aux_times):
            t_eval = np.union1d(t_grid, np.asarray(aux_times, dtype=float))
        sol = solve_ivp(lambda t, y: Mr @ y, (t_grid[0], t_grid[-1]), y0,
                        method="BDF", jac=Mr, t_eval=t_eval, rtol=rtol,
                        atol=atol)
        if not sol.success:
            raise AccuracyError(f"implicit integration failed: {sol.message}")
        raw = sol.y

        def fetch(col):
            return unvec(raw[:n2, col] + 1j * raw[n2:, col], d)

        index = {round(float(t), 12): k for k, t in enumerate(sol.t)}
        aux = {"index": index, "fetch": fetch}
        grid_cols = [index[round(float(t), 12)] for t in t_grid]
        ys = [fetch(k) for k in grid_cols]
        evaluate = None

    else:
        raise DomainError(f"unknown integration method {method!r}")

    diagnostics.update(nfev=int(sol.nfev), n_accepted=int(len(sol.t)))
    states = _validated_states(model, ys, t_grid, tail_tol, diagnostics)
    return Trajectory(t_grid, states, model, diagnostics, evaluate, aux)


KRYLOV_TOL = 1e-11
KRYLOV_MAX_BASIS = 240


def _evolve_krylov(model, M, rho0, t_grid, tail_tol, diagnostics,
                   tol: float = KRYLOV_TOL):
    """Shift-invert Arnoldi propagation of a time-invariant generator.

    Builds a Krylov basis of B = (I - shift*L)^-1 applied to the initial
    state, projects the generator onto it, and evaluates every requested
    time as a small matrix exponential. The inverse compresses the fast
    decaying directions, so a basis of O(100) vectors resolves spans
    covering many decades of decay rates. Convergence is declared when
    enlarging the basis no longer moves any output state (relative l2
    change below tol).
    """
    d = model.space.dim
    n = d * d
    span = t_grid[-1] - t_grid[0]
    shift = span / 250.0
    lu = spla.splu((sp.identity(n, dtype=complex, format="csc")
                    - shift * M).tocsc())
    v0 = vec(rho0.entries)
    beta = np.linalg.norm(v0)
    m_max = min(KRYLOV_MAX_BASIS, n)
    V = np.zeros((n, m_max), dtype=complex)
    Hm = np.zeros((m_max + 1, m_max), dtype=complex)
    V[:, 0] = v0 / beta

    rel_times = t_grid - t_grid[0]
    probe = rel_times[np.round(np.linspace(0, len(rel_times) - 1,
                                           min(12, len(rel_times)))).astype(int)]

    def outputs(k, times):
        He = Hm[:k, :k]
        Am = (np.eye(k) - np.linalg.inv(He)) / shift
        return [(V[:, :k] @ (expm(t * Am)[:, 0] * beta)) for t in times], Am

    prev = None
    k_done = 0
    converged = False
    for k in range(m_max):
        w = lu.solve(V[:, k])
        for _ in range(2):  # classical Gram-Schmidt with reorthogonalization
            c = V[:, :k + 1].conj().T @ w
            w -= V[:, :k + 1] @ c
            Hm[:k + 1, k] += c
        h = np.linalg.norm(w)
        Hm[k + 1, k] = h
        k_done = k + 1
        if h < 1e-13:  # invariant subspace reached: expansion is exact
            converged = True
            break
        if k + 1 < m_max:
            V[:, k + 1] = w / h
        if k_done % 30 == 0 and k_done >= 60:
            cur, _ = outputs(k_done, probe)
            if prev is not None:
                delta = max(np.linalg.norm(a - b) / max(np.linalg.norm(a), 1e-300)
                            for a, b in zip(cur, prev))
                if delta <= tol:
                    converged = True
                    break
            prev = cur
    if not converged and k_done == m_max:
        cur, _ = outputs(k_done, probe)
        if prev is not None:
            delta = max(np.linalg.norm(a - b) / max(np.linalg.norm(a), 1e-300)
                        for a, b in zip(cur, prev))
            converged = delta <= 10 * tol
    if not converged:
        raise AccuracyError(
            f"Krylov propagator did not converge with {k_done} basis vectors; "
            f"use method='bdf'"
        )

    He = Hm[:k_done, :k_done]
    Am = (np.eye(k_done) - np.linalg.inv(He)) / shift
    Vk = V[:, :k_done].copy()

    # diagonalize the small projected generator once so that evaluating an
    # arbitrary time is O(k^2) instead of a fresh matrix exponential
    evaluate = None
    lam_m, S = np.linalg.eig(Am)
    try:
        e1 = np.linalg.solve(S, np.eye(k_done)[:, 0]) * beta
        if np.isfinite(e1).all():
            W = Vk @ S

            def evaluate(t):
                return unvec(W @ (np.exp((t - t_grid[0]) * lam_m) * e1), d)

            ref = Vk @ (expm(rel_times[-1] * Am)[:, 0] * beta)
            if np.abs(evaluate(t_grid[-1]).ravel(order="F") - ref).max() > 1e-9:
                evaluate = None
    except np.linalg.LinAlgError:
        evaluate = None
    if evaluate is None:
        def evaluate(t):
            coef = expm((t - t_grid[0]) * Am)[:, 0] * beta
            return unvec(Vk @ coef, d)

    ys = [evaluate(t) for t in t_grid]

    diagnostics.update(basis_size=int(k_done), shift=float(shift))
    states = _validated_states(model, ys, t_grid, tail_tol, diagnostics)
    return Trajectory(t_grid, states, model, diagnostics, evaluate)


def _evolve_expm(model, rho0, t_grid, tail_tol, diagnostics):
    d = model.space.dim
    if d * d > 4096:
        raise DomainError("expm path sized for dim^2 <= 4096; use bdf")
    M = sparse_superoperator(model).toarray()
    steps = np.diff(t_grid)
    propagators = {}
    ys = [rho0.entries.copy()]
    v = vec(rho0.entries)
    for h in steps:
        key = round(float(h), 15)
        if key not in propagators:
            propagators[key] = expm(M * h)
        v = propagators[key] @ v
        ys.append(unvec(v, d))

    def evaluate(t):
        # exact propagation from the initial state; no interpolation error
        return unvec(expm(M * (t - t_grid[0])) @ vec(rho0.entries), d)

    diagnostics.update(nfev=len(propagators), n_accepted=len(t_grid))
    states = _validated_states(model, ys, t_grid, tail_tol, diagnostics)
    return Trajectory(t_grid, states, model, diagnostics, evaluate)
