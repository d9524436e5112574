import numpy as np
import pytest

from thermkin import (
    DomainError,
    ShapeError,
    apply_adjoint,
    apply_generator,
    evolve,
    fock_space,
    ho_model,
    number_operator,
    population_superoperator,
    qubit_exact_state,
    qubit_model,
    thermal_state,
    to_superoperator,
)
from thermkin.lindblad import sparse_superoperator, unvec, vec
from thermkin.states import bose_einstein_temperature


def random_state(rng, d):
    r = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = r @ r.conj().T
    return r / r.trace()


def random_hermitian(rng, d):
    o = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return o + o.conj().T


T_NBAR1 = bose_einstein_temperature(1.0, 1.0)  # temperature with nbar = 1


def test_generator_annihilates_stationary_state():
    model = qubit_model(1.0, 0.3, 0.7)
    rho = thermal_state(model.space, beta=1.0 / 0.7)
    assert np.abs(apply_generator(model, rho)).max() < 1e-12


def test_generator_rate_matrix_element():
    # ground-state occupation decays at -gamma*nbar from rho = |0><0|
    model = qubit_model(1.0, 0.1, T_NBAR1)
    drho = apply_generator(model, np.diag([1.0, 0.0]).astype(complex))
    assert drho[0, 0].real == pytest.approx(-0.1, rel=1e-12)
    assert abs(drho.trace()) < 1e-12
    assert np.abs(drho - drho.conj().T).max() < 1e-12


def test_generator_moment_flow_rate():
    # occupation flows at gamma*(nbar - n0); the bare coupling sets the rate
    dim, gamma, nbar = 150, 0.1, 10.0
    model = ho_model(dim, 1.0, gamma, nbar)
    space = fock_space(dim, 1.0)
    rho = thermal_state(space, beta=np.log(2.0))  # n0 = 1
    flow = np.trace(number_operator(space).entries @ apply_generator(model, rho)).real
    n0 = np.trace(number_operator(space).entries @ rho.entries).real
    assert flow == pytest.approx(gamma * (nbar - n0), rel=1e-10)
    assert flow == pytest.approx(0.9, rel=1e-6)


def test_adjoint_unital_and_dual():
    rng = np.random.default_rng(42)
    model = ho_model(4, 1.0, 0.5, 0.7, tail_tol=1.0)
    assert np.abs(apply_adjoint(model, np.eye(4, dtype=complex))).max() < 1e-12
    for _ in range(10):
        rho = random_state(rng, 4)
        obs = random_hermitian(rng, 4)
        lhs = np.trace(obs @ apply_generator(model, rho))
        rhs = np.trace(apply_adjoint(model, obs) @ rho)
        assert abs(lhs - rhs) < 1e-10


def test_adjoint_population_observable_stays_diagonal():
    model = qubit_model(1.0, 0.2, 0.6)
    sz = np.diag([1.0, -1.0]).astype(complex)
    out = apply_adjoint(model, sz)
    assert np.abs(out - np.diag(np.diag(out))).max() < 1e-14


def test_shape_errors():
    model = qubit_model(1.0, 0.1, 0.5)
    with pytest.raises(ShapeError):
        apply_generator(model, np.eye(3))
    with pytest.raises(ShapeError):
        apply_adjoint(model, np.eye(3))


def test_superoperator_action_matches_generator():
    rng = np.random.default_rng(5)
    model = ho_model(8, 1.0, 0.2, 1.0, tail_tol=1.0)
    sup = to_superoperator(model)
    for _ in range(10):
        rho = random_state(rng, 8)
        direct = apply_generator(model, rho)
        assert np.abs(sup.apply(rho) - direct).max() < 1e-10
        assert np.abs(unvec(sup.matrix @ vec(rho), 8) - direct).max() < 1e-10


def test_superoperator_trace_preservation_row():
    model = ho_model(12, 1.0, 0.3, 0.5, tail_tol=1.0)
    sup = to_superoperator(model)
    probe = vec(np.eye(12)) @ sup.matrix
    assert np.abs(probe).max() < 1e-10


def test_population_block_equals_rate_matrix():
    gamma, nbar = 0.1, 1.0
    model = qubit_model(1.0, gamma, T_NBAR1)
    # diagonal sub-block of the full superoperator
    sup = to_superoperator(model)
    idx = [0, 3]  # vec indices of (0,0) and (1,1)
    block = sup.matrix[np.ix_(idx, idx)].real
    expected = np.array([[-gamma * nbar, gamma * (nbar + 1)],
                         [gamma * nbar, -gamma * (nbar + 1)]])
    assert np.allclose(block, expected, atol=1e-12)
    # and the populations representation is exactly that matrix
    pop = population_superoperator(model)
    assert np.allclose(pop.matrix.real, expected, atol=1e-12)


def test_population_superoperator_rejects_coherence_mixing():
    from thermkin import QBMParams, qbm_model
    params = QBMParams(1.0, 1e-3, 1.0, 0.1, 1e-2)
    model = qbm_model(40, params, tail_tol=1.0)
    with pytest.raises(DomainError):
        population_superoperator(model)


def test_evolve_stationary_initial_state_is_constant():
    model = qubit_model(1.0, 0.4, 0.5)
    rho0 = thermal_state(model.space, beta=2.0)
    traj = evolve(model, rho0, np.linspace(0, 10, 21))
    for state in traj.states:
        assert np.abs(state.entries - rho0.entries).max() < 1e-10


def test_evolve_matches_qubit_closed_form():
    beta0, beta, omega, gamma = 1 / 1.5, 2.0, 1.0, 1.0
    model = qubit_model(omega, gamma, 0.5)
    rho0 = qubit_exact_state(0.0, beta0, beta, omega, gamma)
    grid = np.linspace(0.0, 6.0 / gamma, 25)
    traj = evolve(model, rho0, grid)
    for k, t in enumerate(grid):
        exact = qubit_exact_state(t, beta0, beta, omega, gamma)
        assert np.abs(traj.states[k].entries - exact.entries).max() < 1e-8


def test_evolve_ho_moment_oracle_small():
    from thermkin import ho_moment_solution
    dim, gamma, nbar = 60, 0.1, 3.0
    model = ho_model(dim, 1.0, gamma, nbar, tail_tol=1e-3)
    space = fock_space(dim, 1.0)
    rho0 = thermal_state(space, beta=np.log(2.0), tail_tol=1e-3)
    grid = np.linspace(0, 40, 11)
    traj = evolve(model, rho0, grid, rtol=1e-10, atol=1e-13)
    num = number_operator(space).entries
    occ = np.array([np.trace(num @ s.entries).real for s in traj.states])
    oracle = ho_moment_solution(grid, 1.0, nbar, gamma)
    # the untruncated oracle is approached only up to the occupation weight
    # sitting beyond the truncation: sum_{n>=N} n p_n = q^N (N + nbar)
    q = nbar / (1.0 + nbar)
    trunc_bias = q ** dim * (dim + nbar)
    assert np.abs(occ - oracle).max() < trunc_bias + 1e-8
    assert np.abs(occ - oracle).max() > 0.1 * trunc_bias  # bias is real, not noise


def test_evolve_methods_agree():
    model = ho_model(10, 1.0, 0.3, 0.8, tail_tol=1e-2)
    rho0 = thermal_state(fock_space(10, 1.0), beta=2.0, tail_tol=1e-2)
    grid = np.linspace(0, 5, 6)
    base = evolve(model, rho0, grid, method="dop853", rtol=1e-11, atol=1e-14)
    for method in ("bdf", "expm", "krylov"):
        other = evolve(model, rho0, grid, method=method, rtol=1e-10, atol=1e-13)
        for a, b in zip(base.states, other.states):
            assert np.abs(a.entries - b.entries).max() < 5e-8


def test_krylov_matches_closed_form_on_stiff_scale():
    # long-span qubit run exercises the shift-invert path end to end
    beta0, beta, omega, gamma = 1 / 1.5, 2.0, 1.0, 1.0
    model = qubit_model(omega, gamma, 0.5)
    rho0 = qubit_exact_state(0.0, beta0, beta, omega, gamma)
    grid = np.linspace(0.0, 40.0, 11)
    traj = evolve(model, rho0, grid, method="krylov")
    for k, t in enumerate(grid):
        exact = qubit_exact_state(t, beta0, beta, omega, gamma)
        assert np.abs(traj.states[k].entries - exact.entries).max() < 1e-10
    t = 3.21
    assert np.abs(traj.state_matrix(t)
                  - qubit_exact_state(t, beta0, beta, omega, gamma).entries).max() < 1e-10


def test_evolve_dense_and_aux_lookup():
    model = qubit_model(1.0, 1.0, 0.5)
    rho0 = qubit_exact_state(0.0, 1 / 1.5, 2.0, 1.0, 1.0)
    grid = np.linspace(0, 4, 9)
    traj = evolve(model, rho0, grid)
    t = 1.2345
    exact = qubit_exact_state(t, 1 / 1.5, 2.0, 1.0, 1.0)
    assert np.abs(traj.state_matrix(t) - exact.entries).max() < 1e-8
    # stiff path: only stored times are reachable
    aux = np.array([0.31, 2.17])
    stiff = evolve(model, rho0, grid, method="bdf", aux_times=aux,
                   rtol=1e-10, atol=1e-13)
    got = stiff.state_matrix(0.31)
    exact = qubit_exact_state(0.31, 1 / 1.5, 2.0, 1.0, 1.0)
    assert np.abs(got - exact.entries).max() < 1e-7
    with pytest.raises(DomainError):
        stiff.state_matrix(0.999)


def test_evolve_bad_grid():
    model = qubit_model(1.0, 1.0, 0.5)
    rho0 = thermal_state(model.space, 2.0)
    with pytest.raises(DomainError):
        evolve(model, rho0, [0.0, 0.0, 1.0])


def test_fastest_rate_estimate_bounds_spectrum():
    model = ho_model(20, 1.0, 0.3, 1.0, tail_tol=1.0)
    from thermkin.lindblad import _estimate_fastest_rate
    M = sparse_superoperator(model)
    bound = _estimate_fastest_rate(M)
    eigs = np.linalg.eigvals(M.toarray())
    assert bound >= np.abs(eigs).max() - 1e-9
