"""Built-in oracle and invariant checks behind `thermkin validate`.

Each check recomputes an expected value through an independent route
(closed form, brute-force duality, finite differences, or a second root
finder) and compares against the library path. Kept small enough to run in
seconds.
"""

import numpy as np

from .lindblad import apply_adjoint, apply_generator, evolve, to_superoperator
from .metrics import bures_distance, fidelity, kinematics, qfi
from .models import (
    ho_fidelity_analytic,
    ho_model,
    ho_moment_solution,
    qubit_closed_forms,
    qubit_exact_state,
    qubit_model,
)
from .protocols import FamilyConfig, solve_equidistant_cold
from .spectra import evolve_spectral, overlaps, spectral_decompose
from .states import (
    bose_einstein,
    bose_einstein_temperature,
    fock_space,
    ladder_operators,
    number_operator,
    thermal_state,
)


def _check_bose_einstein():
    temps = np.logspace(-2, 3, 12)
    back = [bose_einstein_temperature(1.0, bose_einstein(1.0, t)) for t in temps]
    err = max(abs(b - t) / t for b, t in zip(back, temps))
    return err < 1e-12, f"roundtrip rel err {err:.2e}"


def _check_ladder_algebra():
    space = fock_space(30, 1.0)
    a, ad = ladder_operators(space)
    num = ad.entries @ a.entries
    err = np.abs(np.diag(num).real - np.arange(30)).max()
    comm = a.entries @ ad.entries - num
    edge = abs(comm[-1, -1] + (30 - 1))
    body = np.abs(comm[:-1, :-1] - np.eye(29)).max()
    return err < 1e-12 and edge < 1e-12 and body < 1e-12, \
        f"number err {err:.1e}, commutator body {body:.1e}"


def _check_detailed_balance():
    space = fock_space(40, 1.0)
    rho = thermal_state(space, beta=0.7)
    p = np.diag(rho.entries).real
    ratios = p[1:25] / p[:24]
    err = np.abs(ratios - np.exp(-0.7)).max()
    return err < 1e-12, f"detailed balance err {err:.2e}"


def _check_duality():
    rng = np.random.default_rng(7)
    model = ho_model(5, 1.0, 0.3, 0.8, tail_tol=1.0)
    err = 0.0
    for _ in range(5):
        o = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        o = o + o.conj().T
        r = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        r = r @ r.conj().T
        r = r / r.trace()
        lhs = np.trace(o @ apply_generator(model, r))
        rhs = np.trace(apply_adjoint(model, o) @ r)
        err = max(err, abs(lhs - rhs))
    return err < 1e-10, f"duality err {err:.2e}"


def _check_superop_action():
    rng = np.random.default_rng(11)
    model = ho_model(8, 1.0, 0.2, 1.0, tail_tol=1.0)
    sup = to_superoperator(model)
    err = 0.0
    for _ in range(10):
        r = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        r = r @ r.conj().T
        r = r / r.trace()
        err = max(err, np.abs(sup.apply(r) - apply_generator(model, r)).max())
    return err < 1e-10, f"superop action err {err:.2e}"


def _check_qubit_oracle():
    model = qubit_model(1.0, 1.0, 0.5)
    rho0 = qubit_exact_state(0.0, 1 / 1.5, 2.0, 1.0, 1.0)
    grid = np.linspace(0, 6, 31)
    traj = evolve(model, rho0, grid)
    err = max(np.abs(traj.states[k].entries
                     - qubit_exact_state(t, 1 / 1.5, 2.0, 1.0, 1.0).entries).max()
              for k, t in enumerate(grid))
    return err < 1e-8, f"trajectory vs closed form {err:.2e}"


def _check_spectral_reconstruction():
    model = ho_model(12, 1.0, 0.2, 0.5, tail_tol=1e-3)
    rho0 = thermal_state(fock_space(12, 1.0), beta=2.0, tail_tol=1e-3)
    decomp = spectral_decompose(to_superoperator(model))
    grid = np.linspace(0, 8, 9)
    traj = evolve(model, rho0, grid, rtol=1e-10, atol=1e-13)
    err = max(np.abs(evolve_spectral(decomp, rho0, t, tail_tol=1e-3).entries
                     - traj.states[k].entries).max()
              for k, t in enumerate(grid))
    return err < 1e-7, f"spectral vs integrated {err:.2e}"


def _check_fidelity_properties():
    rng = np.random.default_rng(3)
    err = 0.0
    for _ in range(4):
        a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        a = a @ a.conj().T
        a = a / a.trace()
        b = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        b = b @ b.conj().T
        b = b / b.trace()
        err = max(err, abs(fidelity(a, b) - fidelity(b, a)))
        q, _ = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))
        err = max(err, abs(fidelity(q @ a @ q.conj().T, q @ b @ q.conj().T)
                           - fidelity(a, b)))
    return err < 1e-10, f"symmetry/unitary-invariance err {err:.2e}"


def _check_qfi_consistency():
    dt = 1e-5
    err = 0.0
    for t in (0.2, 0.8, 2.0):
        r1 = qubit_exact_state(t, 1 / 1.5, 2.0, 1.0, 1.0)
        r2 = qubit_exact_state(t + dt, 1 / 1.5, 2.0, 1.0, 1.0)
        model = qubit_model(1.0, 1.0, 0.5)
        iq = qfi(r1, apply_generator(model, r1))
        fd = 4.0 * bures_distance(r1, r2) ** 2 / dt ** 2
        err = max(err, abs(fd - iq) / iq)
    return err < 1e-4, f"finite-difference QFI rel err {err:.2e}"


def _check_equidistance():
    config = FamilyConfig("qubit", omega=1.0, gamma=1.0)
    tc, res = solve_equidistant_cold(config, 0.5, 1.5)
    # independent golden-section search on the same residual magnitude
    from .metrics import fidelity as fid
    warm = config.thermal(0.5)
    target = fid(config.thermal(1.5), warm)

    def loss(x):
        return (fid(config.thermal(x), warm) - target) ** 2

    lo, hi = 1e-3 * 0.5, 0.5 * (1 - 1e-12)
    invphi = (np.sqrt(5) - 1) / 2
    c, d = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
    for _ in range(200):
        if loss(c) < loss(d):
            hi = d
        else:
            lo = c
        c, d = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
    tc_golden = 0.5 * (lo + hi)
    return abs(tc - tc_golden) < 1e-8 and abs(res) <= 1e-10, \
        f"bisection {tc:.10f} vs golden {tc_golden:.10f}, residual {res:.1e}"


def _check_ho_moments():
    dim, g, nb = 60, 0.1, 3.0
    model = ho_model(dim, 1.0, g, nb, tail_tol=1e-4)
    space = fock_space(dim, 1.0)
    rho0 = thermal_state(space, beta=np.log(2.0), tail_tol=1e-4)
    grid = np.linspace(0, 30, 16)
    traj = evolve(model, rho0, grid, rtol=1e-10, atol=1e-13)
    num = number_operator(space).entries
    occ = np.array([np.trace(num @ s.entries).real for s in traj.states])
    oracle = ho_moment_solution(grid, 1.0, nb, g)
    err = np.abs(occ - oracle).max() / nb
    bath = thermal_state(space, 1.0 / bose_einstein_temperature(1.0, nb),
                         tail_tol=1e-4)
    f_err = abs(fidelity(traj.states[-1], bath)
                - ho_fidelity_analytic(occ[-1], nb))
    return err < 1e-6 and f_err < 1e-6, \
        f"occupation err {err:.2e}, fidelity err {f_err:.2e}"


CHECKS = [
    ("bose-einstein inversion", _check_bose_einstein),
    ("ladder operator algebra", _check_ladder_algebra),
    ("thermal detailed balance", _check_detailed_balance),
    ("generator/adjoint duality", _check_duality),
    ("superoperator action", _check_superop_action),
    ("qubit trajectory vs closed form", _check_qubit_oracle),
    ("spectral reconstruction", _check_spectral_reconstruction),
    ("fidelity properties", _check_fidelity_properties),
    ("QFI finite-difference consistency", _check_qfi_consistency),
    ("equidistant-state solver", _check_equidistance),
    ("oscillator moment oracle", _check_ho_moments),
]


def run_validation_suite(verbose: bool = False) -> int:
    failures = 0
    for name, check in CHECKS:
        try:
            ok, detail = check()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        failures += (not ok)
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    if verbose:
        print(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return failures
