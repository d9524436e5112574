import numpy as np
import pytest

from thermkin import (
    DomainError,
    apply_generator,
    bures_distance,
    evolve,
    fidelity,
    fock_space,
    ho_model,
    kinematics,
    qfi,
    qubit_exact_state,
    qubit_model,
    qubit_pair_fidelity,
    sld,
    statistical_velocity,
    thermal_state,
)
from thermkin.metrics import dyadic_refinement_times
from thermkin.models import qubit_closed_forms
from thermkin.states import DensityMatrix, qubit_space


def random_state(rng, d):
    r = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = r @ r.conj().T
    return r / r.trace()


def test_fidelity_identity_and_orthogonal():
    space = qubit_space(1.0)
    ground = DensityMatrix(space, np.diag([1.0, 0.0]))
    excited = DensityMatrix(space, np.diag([0.0, 1.0]))
    assert fidelity(ground, ground) == 1.0
    assert fidelity(ground, excited) == 0.0
    assert bures_distance(ground, ground) == 0.0
    assert bures_distance(ground, excited) == pytest.approx(np.sqrt(2), rel=1e-14)


def test_fidelity_swapped_thermal_pair():
    # diag(2/3,1/3) vs diag(1/3,2/3): sum sqrt(p q) = 2 sqrt(2)/3
    a = np.diag([2 / 3, 1 / 3])
    b = np.diag([1 / 3, 2 / 3])
    assert fidelity(a, b) == pytest.approx(2 * np.sqrt(2) / 3, rel=1e-14)


def test_fidelity_matches_qubit_closed_form_grid():
    omega = 1.0
    space = qubit_space(omega)
    betas = [0.3, 0.7, 1.3, 2.0, 3.5]
    for b1 in betas:
        for b2 in betas:
            general = fidelity(thermal_state(space, b1), thermal_state(space, b2))
            assert abs(general - qubit_pair_fidelity(b1, b2, omega)) < 1e-12


def test_fidelity_symmetry_and_unitary_invariance():
    rng = np.random.default_rng(12)
    for d in (3, 6, 8):
        a, b = random_state(rng, d), random_state(rng, d)
        assert abs(fidelity(a, b) - fidelity(b, a)) < 1e-10
        q, _ = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
        assert abs(fidelity(q @ a @ q.conj().T, q @ b @ q.conj().T)
                   - fidelity(a, b)) < 1e-10


def test_fidelity_diagonal_reduction_on_general_path():
    # force the general eigensolve path with a tiny off-diagonal perturbation
    rng = np.random.default_rng(0)
    p = np.sort(rng.random(5))
    p = p / p.sum()
    q = np.sort(rng.random(5))[::-1]
    q = q / q.sum()
    a, b = np.diag(p).astype(complex), np.diag(q).astype(complex)
    a[0, 1] = a[1, 0] = 1e-9  # breaks the diagonal fast path, not the value
    assert abs(fidelity(a, b) - np.sqrt(p * q).sum()) < 1e-8


def test_qfi_zero_for_stationary():
    assert qfi(np.diag([0.6, 0.4]), np.zeros((2, 2))) == 0.0


def test_qfi_requires_hermitian_traceless():
    rho = np.diag([0.6, 0.4]).astype(complex)
    with pytest.raises(DomainError):
        qfi(rho, np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(DomainError):
        sld(rho, np.diag([1.0, 1.0]))


def test_sld_defining_equation():
    rng = np.random.default_rng(4)
    rho = random_state(rng, 5)
    d = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    d = d + d.conj().T
    d = d - np.trace(d) / 5 * np.eye(5)
    L = sld(rho, d)
    assert np.abs(0.5 * (L @ rho + rho @ L) - d).max() < 1e-9
    assert qfi(rho, d) == pytest.approx(np.trace(L @ L @ rho).real, rel=1e-10)


def test_qfi_matches_qubit_closed_form():
    beta0, beta, omega, gamma = 1 / 1.5, 2.0, 1.0, 1.0
    model = qubit_model(omega, gamma, 0.5)
    for t in np.linspace(0.0, 6.0, 13):
        rho = qubit_exact_state(t, beta0, beta, omega, gamma)
        got = qfi(rho, apply_generator(model, rho))
        expected = qubit_closed_forms(t, beta0, beta, omega, gamma).I_Q
        assert got == pytest.approx(expected, rel=1e-8)


def test_qfi_finite_difference_bures_consistency():
    beta0, beta, omega, gamma = 1 / 1.5, 2.0, 1.0, 1.0
    model = qubit_model(omega, gamma, 0.5)
    dt = 1e-5
    for t in np.linspace(0.05, 3.0, 10):
        r1 = qubit_exact_state(t, beta0, beta, omega, gamma)
        r2 = qubit_exact_state(t + dt, beta0, beta, omega, gamma)
        iq = qfi(r1, apply_generator(model, r1))
        fd = 4.0 * bures_distance(r1, r2) ** 2 / dt ** 2
        assert abs(fd - iq) / iq < 1e-4


def test_velocity_is_half_sqrt_qfi():
    rng = np.random.default_rng(9)
    rho = random_state(rng, 4)
    model = ho_model(4, 1.0, 0.5, 0.5, tail_tol=1.0)
    drho = apply_generator(model, rho)
    assert statistical_velocity(rho, drho) == pytest.approx(
        0.5 * np.sqrt(qfi(rho, drho)), rel=1e-12)


def _qubit_trajectory(beta0=1 / 1.5, beta=2.0, omega=1.0, gamma=1.0,
                      t_final=6.0, n=61):
    model = qubit_model(omega, gamma, 1.0 / beta)
    rho0 = qubit_exact_state(0.0, beta0, beta, omega, gamma)
    grid = np.linspace(0.0, t_final, n)
    return model, evolve(model, rho0, grid, rtol=1e-11, atol=1e-14)


def test_kinematics_against_qubit_closed_forms():
    beta0, beta, omega, gamma = 1 / 1.5, 2.0, 1.0, 1.0
    model, traj = _qubit_trajectory()
    target = thermal_state(model.space, beta)
    record = kinematics(traj, model, target)
    for k, t in enumerate(record.times):
        ref = qubit_closed_forms(t, beta0, beta, omega, gamma)
        assert record.fidelity_to_target[k] == pytest.approx(ref.F_time, rel=1e-9)
        assert record.velocity[k] == pytest.approx(ref.v, rel=1e-7)
        if t > 0:
            assert record.length[k] == pytest.approx(ref.length, rel=1e-6)
    assert record.completion[0] == 0.0
    assert record.completion[-1] == 1.0
    assert np.all(np.diff(record.completion) >= -1e-15)


def test_kinematics_length_additivity():
    model, traj = _qubit_trajectory()
    target = thermal_state(model.space, 2.0)
    record = kinematics(traj, model, target)
    k = len(record.times) // 2
    # cumulative length at the midpoint plus the remainder equals the total
    first = record.length[k]
    rest = record.length[-1] - record.length[k]
    ref = qubit_closed_forms(record.times[-1], 1 / 1.5, 2.0, 1.0, 1.0).length
    assert first + rest == pytest.approx(ref, rel=1e-6)


def test_kinematics_degenerate_path_flag():
    model = qubit_model(1.0, 0.5, 0.5)
    rho0 = thermal_state(model.space, 2.0)
    traj = evolve(model, rho0, np.linspace(0, 3, 7))
    record = kinematics(traj, model, rho0)
    assert record.degenerate
    assert record.completion is None
    assert np.abs(record.velocity).max() < 1e-6


def test_time_to_completion_interpolation():
    model, traj = _qubit_trajectory()
    record = kinematics(traj, model, thermal_state(model.space, 2.0))
    t9 = record.time_to_completion(0.9)
    k = np.searchsorted(record.times, t9)
    assert record.completion[k - 1] <= 0.9 <= record.completion[k]


def test_dyadic_times_nest_exactly():
    grid = np.linspace(0.0, 5.0, 11)
    deep = set(dyadic_refinement_times(grid, 3).tolist())
    shallow = set(dyadic_refinement_times(grid, 2).tolist())
    assert shallow < deep  # midpoint sets are exactly nested


def test_kinematics_on_stiff_lookup_trajectory():
    # bdf path with aux times: quadrature uses stored states only
    beta0, beta, omega, gamma = 1 / 1.5, 2.0, 1.0, 1.0
    model = qubit_model(omega, gamma, 1.0 / beta)
    rho0 = qubit_exact_state(0.0, beta0, beta, omega, gamma)
    grid = np.linspace(0.0, 6.0, 121)
    aux = dyadic_refinement_times(grid, 2)
    traj = evolve(model, rho0, grid, method="bdf", aux_times=aux,
                  rtol=1e-10, atol=1e-13)
    record = kinematics(traj, model, thermal_state(model.space, beta),
                        max_levels=1)
    ref = qubit_closed_forms(6.0, beta0, beta, omega, gamma)
    assert record.length[-1] == pytest.approx(ref.length, rel=1e-5)
