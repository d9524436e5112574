import numpy as np
import pytest

from thermkin import (
    DensityMatrix,
    DomainError,
    StateInvariantError,
    TruncationOverflowError,
    UnsupportedSpaceError,
    bose_einstein,
    bose_einstein_temperature,
    fock_space,
    ladder_operators,
    number_operator,
    position_momentum,
    qubit_space,
    thermal_state,
)
from thermkin.states import BathSpec, fock_dim_for_tail, thermal_occupations


def test_bose_einstein_zero_temperature_limit():
    assert bose_einstein(1.0, 1e-3) < 1e-300


def test_bose_einstein_inversion_closed_form():
    # T = omega / ln(1 + 1/nbar), evaluated independently
    assert bose_einstein_temperature(1.0, 1.0) == pytest.approx(1 / np.log(2), rel=1e-14)
    assert bose_einstein_temperature(1.0, 10.0) == pytest.approx(1 / np.log(1.1), rel=1e-14)


def test_bose_einstein_monotone_and_roundtrip():
    temps = np.logspace(-2, 3, 40)
    occ = [bose_einstein(1.0, t) for t in temps]
    assert all(b > a for a, b in zip(occ, occ[1:]))
    back = [bose_einstein_temperature(1.0, n) for n in occ]
    assert np.allclose(back, temps, rtol=1e-12)


def test_bose_einstein_domain():
    with pytest.raises(DomainError):
        bose_einstein(-1.0, 1.0)
    with pytest.raises(DomainError):
        bose_einstein(1.0, 0.0)


def test_ladder_two_level_truncation():
    a, ad = ladder_operators(fock_space(2, 1.0))
    assert np.allclose(a.entries, [[0, 1], [0, 0]])
    assert np.allclose(ad.entries, a.entries.conj().T)


def test_number_operator_diagonal():
    space = fock_space(3, 1.0)
    a, ad = ladder_operators(space)
    assert np.allclose(ad.entries @ a.entries, np.diag([0, 1, 2]))


def test_ladder_commutator_truncation_artifact():
    dim = 150
    a, ad = ladder_operators(fock_space(dim, 1.0))
    comm = a.entries @ ad.entries - ad.entries @ a.entries
    assert abs(comm[-1, -1] - (-(dim - 1))) < 1e-12
    body = comm - np.diag(np.diag(comm))
    assert np.abs(body).max() < 1e-12
    assert np.abs(np.diag(comm)[:-1] - 1.0).max() < 1e-12


def test_ladder_requires_fock():
    with pytest.raises(UnsupportedSpaceError):
        ladder_operators(qubit_space(1.0))


def test_position_momentum_elements_and_hermiticity():
    space = fock_space(3, 1.0)
    x, p = position_momentum(space, mass=1.0)
    assert x.entries[0, 1] == pytest.approx(1 / np.sqrt(2), rel=1e-14)
    assert np.abs(x.entries - x.entries.conj().T).max() < 1e-12
    assert np.abs(p.entries - p.entries.conj().T).max() < 1e-12


def test_position_momentum_commutator():
    space = fock_space(150, 1e-3)
    x, p = position_momentum(space, mass=1.0)
    comm = x.entries @ p.entries - p.entries @ x.entries
    assert abs(comm[0, 0] - 1j) < 1e-10
    assert np.abs(np.diag(comm)[:-1] - 1j).max() < 1e-10


def test_thermal_qubit_ground_state_limit():
    rho = thermal_state(qubit_space(1.0), beta=1e4)
    assert np.allclose(np.diag(rho.entries).real, [1.0, 0.0], atol=1e-12)


def test_thermal_qubit_ln2():
    rho = thermal_state(qubit_space(1.0), beta=np.log(2.0))
    assert np.allclose(np.diag(rho.entries).real, [2 / 3, 1 / 3], rtol=1e-14)


def test_thermal_fock_nbar_one_geometric():
    # nbar = 1 corresponds to beta*omega = ln 2 and p_n = 2^-(n+1)
    space = fock_space(60, 1.0)
    rho = thermal_state(space, beta=np.log(2.0))
    expected = 0.5 ** (np.arange(60) + 1)
    expected = expected / expected.sum()
    assert np.allclose(np.diag(rho.entries).real, expected, rtol=1e-12)


def test_thermal_detailed_balance_ratio():
    space = fock_space(80, 1.0)
    beta = 0.31
    p = np.diag(thermal_state(space, beta).entries).real
    good = p > 1e-280  # avoid denormal tail
    ratios = p[1:][good[1:]] / p[:-1][good[1:]]
    assert np.abs(ratios - np.exp(-beta)).max() < 1e-12


def test_thermal_truncation_overflow_hint():
    space = fock_space(40, 1.0)
    beta = 1.0 / bose_einstein_temperature(1.0, 10.0)
    with pytest.raises(TruncationOverflowError) as err:
        thermal_state(space, beta)
    need = err.value.required_dim
    assert need is not None
    big = fock_space(need, 1.0)
    rho = thermal_state(big, beta)  # hinted dimension passes
    assert rho.entries[-1, -1].real <= 1e-7


def test_fock_dim_for_tail_consistency():
    beta = 1.0 / bose_einstein_temperature(1.0, 10.0)
    need = fock_dim_for_tail(beta, 1.0, 1e-7)
    p = thermal_occupations(fock_space(need, 1.0), beta)
    assert p[-1] <= 1e-7
    p_small = thermal_occupations(fock_space(need - 1, 1.0), beta)
    assert p_small[-1] > 1e-7


def test_density_matrix_invariants_reject_bad_states():
    space = qubit_space(1.0)
    with pytest.raises(StateInvariantError):
        DensityMatrix(space, np.array([[0.5, 0.1], [0.3, 0.5]]))  # not Hermitian
    with pytest.raises(StateInvariantError):
        DensityMatrix(space, np.diag([0.7, 0.7]))  # trace off
    with pytest.raises(StateInvariantError):
        DensityMatrix(space, np.diag([1.5, -0.5]))  # negative eigenvalue


def test_density_matrix_diagnostics_never_mutate():
    space = qubit_space(1.0)
    eps = 5e-11  # inside the PSD tolerance
    rho = DensityMatrix(space, np.diag([1.0 + eps, -eps]))
    assert rho.entries[1, 1].real == -eps
    assert rho.diagnostics["clamped_min_eigenvalue"] == 0.0


def test_bath_spec_consistency():
    bath = BathSpec.from_nbar(1.0, 0.5, 2.0)
    assert bath.temperature == pytest.approx(1 / np.log(1.5), rel=1e-13)
    with pytest.raises(DomainError):
        BathSpec(1.0, 0.5, 1.0, 5.0, given="nbar")  # inconsistent pair
    with pytest.raises(DomainError):
        BathSpec.from_temperature(1.0, -0.5, 1.0)
