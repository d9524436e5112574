"""Liouvillian spectral decomposition with biorthonormal left/right modes.

Hermiticity preservation makes the generator a real matrix in any
orthonormal basis of Hermitian matrices, so the decomposition transforms to
that basis and runs a real nonsymmetric eigensolve. This keeps conjugate
eigenvalue pairs exact and makes real-eigenvalue modes Hermitian by
construction.

Eigenvalues are sorted by ascending |Re|, ties by ascending Im. The zero
mode is rescaled to unit trace (the stationary state); every other right
mode is scaled so its largest-magnitude entry is 1 with positive real
phase, which fixes the scale of the initial-state overlaps deterministically.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eig

from .errors import (
    DegenerateSpectrumError,
    NonDiagonalizableError,
    NumericalError,
    ShapeError,
)
from .lindblad import COLUMN_STACKED, POPULATIONS, Superoperator, unvec, vec
from .states import DensityMatrix, HilbertSpec

ZERO_MODE_TOL = 1e-10
BIORTHO_TOL = 1e-8
DEFECT_TOL = 1e-14


def hermitian_basis(dim: int) -> sp.csr_matrix:
    """Rows are vec(B_k)^H for an orthonormal Hermitian matrix basis B_k."""
    rows, cols, vals = [], [], []
    r = 0
    for n in range(dim):
        rows.append(r); cols.append(n + n * dim); vals.append(1.0)
        r += 1
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for n in range(dim):
        for m in range(n + 1, dim):
            # symmetric element (E_nm + E_mn)/sqrt(2)
            rows += [r, r]; cols += [n + m * dim, m + n * dim]
            vals += [inv_sqrt2, inv_sqrt2]
            r += 1
            # antisymmetric element i(E_mn - E_nm)/sqrt(2); row stores conj
            rows += [r, r]; cols += [n + m * dim, m + n * dim]
            vals += [1j * inv_sqrt2, -1j * inv_sqrt2]
            r += 1
    d2 = dim * dim
    return sp.csr_matrix((vals, (rows, cols)), shape=(d2, d2), dtype=complex)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Sorted eigenvalues with biorthonormal right/left eigenmatrices.

    right_modes[k] and left_modes[k] satisfy Tr(left[k] right[h]) = delta_kh;
    right_modes[0] is the unit-trace stationary state.
    """

    space: HilbertSpec
    representation: str
    eigenvalues: np.ndarray
    right_modes: tuple
    left_modes: tuple
    gap: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    def stationary_state(self, tail_tol=None) -> DensityMatrix:
        rho = self.right_modes[0]
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / rho.trace().real
        kwargs = {} if tail_tol is None else {"tail_tol": tail_tol}
        return DensityMatrix(self.space, rho, **kwargs)


def _phase_fix(mode: np.ndarray) -> np.ndarray:
    """Scale so the first largest-|.| entry (row-major) is 1."""
    flat = mode.ravel()
    mags = np.abs(flat)
    top = mags.max()
    if top == 0:
        return mode
    idx = int(np.argmax(mags >= top * (1 - 1e-12)))
    return mode / flat[idx]


def spectral_decompose(superop: Superoperator, zero_tol: float = ZERO_MODE_TOL,
                       bio_tol: float = BIORTHO_TOL) -> SpectralDecomposition:
    """Full eigendecomposition of a generator in superoperator form.

    Raises DegenerateSpectrumError when the zero eigenvalue is not unique
    and NonDiagonalizableError when left/right pairing or the final
    biorthonormality check (tolerance bio_tol) breaks down.
    """
    d = superop.space.dim
    M = superop.matrix
    diagnostics = {}

    if superop.representation == POPULATIONS:
        dust = float(np.abs(M.imag).max())
        R = M.real.copy()
        T = None
    elif superop.representation == COLUMN_STACKED:
        T = hermitian_basis(d)
        RT = (T @ M) @ T.conj().T.toarray()
        dust = float(np.abs(RT.imag).max())
        R = RT.real
    else:
        raise ShapeError(f"unknown representation {superop.representation!r}")
    scale = max(1.0, float(np.abs(R).max()))
    if dust > 1e-10 * scale:
        raise NumericalError(
            f"generator is not Hermiticity preserving (imag dust {dust:.3e})"
        )
    diagnostics["real_form_dust"] = dust

    lam, vl, vr = eig(R, left=True, right=True)
    order = np.lexsort((lam.imag, np.abs(lam.real)))
    lam, vl, vr = lam[order], vl[:, order], vr[:, order]

    n_zero = int(np.sum(np.abs(lam) < zero_tol))
    if n_zero != 1:
        raise DegenerateSpectrumError(
            f"{n_zero} eigenvalues within {zero_tol:.1e} of zero; "
            f"need exactly one stationary mode"
        )
    if not np.abs(lam[0]) < zero_tol:
        raise DegenerateSpectrumError("zero mode is not the slowest eigenvalue")

    # LAPACK aligns left/right columns; pairing strength vl^H vr must not vanish
    s = np.einsum("ij,ij->j", vl.conj(), vr)
    min_s = float(np.abs(s).min())
    diagnostics["min_pairing_overlap"] = min_s
    if min_s < DEFECT_TOL:
        raise NonDiagonalizableError(
            f"defective eigenpair: left/right overlap {min_s:.3e}"
        )

    right_modes, left_modes = [], []
    for k in range(len(lam)):
        if superop.representation == COLUMN_STACKED:
            mode = unvec(T.conj().T @ vr[:, k], d)
            # functional Tr(W rho) with vec(W^T) = T^T conj(vl); scale fixed below
            left = unvec(T.T @ vl[:, k].conj(), d).T
        else:
            mode = np.diag(vr[:, k])
            left = np.diag(vl[:, k].conj())
        if k == 0:
            tr = mode.trace()
            if abs(tr) < 1e-12:
                raise DegenerateSpectrumError("stationary mode has zero trace")
            mode = mode / tr
        else:
            mode = _phase_fix(mode)
        # fix the left scale so Tr(left_k right_k) = 1
        pair = np.sum(left * mode.T)
        if abs(pair) < DEFECT_TOL:
            raise NonDiagonalizableError(
                f"mode {k}: trace pairing {abs(pair):.3e} too small to normalize"
            )
        right_modes.append(mode)
        left_modes.append(left / pair)

    lam = lam.copy()
    lam[0] = 0.0 if abs(lam[0]) < zero_tol else lam[0]
    gap = float(abs(lam[1].real)) if len(lam) > 1 else 0.0

    decomp = SpectralDecomposition(
        space=superop.space,
        representation=superop.representation,
        eigenvalues=lam,
        right_modes=tuple(right_modes),
        left_modes=tuple(left_modes),
        gap=gap,
        diagnostics=diagnostics,
    )
    _validate_biortho(decomp, bio_tol)
    return decomp


def _validate_biortho(decomp: SpectralDecomposition, bio_tol: float):
    n = len(decomp.eigenvalues)
    L = np.stack([m.T.ravel() for m in decomp.left_modes])
    Rm = np.stack([m.ravel() for m in decomp.right_modes])
    gram = L @ Rm.T
    dev = float(np.abs(gram - np.eye(n)).max())
    decomp.diagnostics["biortho_deviation"] = dev
    if dev > bio_tol:
        raise NonDiagonalizableError(
            f"biorthonormalization deviation {dev:.3e} exceeds {bio_tol:.1e}; "
            f"eigenbasis too ill-conditioned at this dimension"
        )


def overlaps(decomp: SpectralDecomposition, rho0) -> np.ndarray:
    """Mode weights Tr(left_k rho0) of an initial state."""
    rho = rho0.entries if isinstance(rho0, DensityMatrix) else np.asarray(rho0)
    if rho.shape != (decomp.space.dim, decomp.space.dim):
        raise ShapeError(f"state shape {rho.shape} vs dim {decomp.space.dim}")
    L = np.stack([m.T.ravel() for m in decomp.left_modes])
    xs = L @ rho.ravel()
    if abs(xs[0] - 1.0) > 1e-8:
        raise NumericalError(
            f"stationary-mode overlap {xs[0]} deviates from 1; "
            f"decomposition normalization is broken"
        )
    return xs


def evolve_spectral(decomp: SpectralDecomposition, rho0, t: float,
                    tail_tol=None) -> DensityMatrix:
    """State at time t from the mode expansion, Hermitized."""
    rho = rho0.entries if isinstance(rho0, DensityMatrix) else np.asarray(rho0)
    xs = overlaps(decomp, rho)
    out = decomp.right_modes[0].astype(complex).copy()
    for k in range(1, len(xs)):
        out += np.exp(decomp.eigenvalues[k] * t) * xs[k] * decomp.right_modes[k]
    out = 0.5 * (out + out.conj().T)
    out = out / out.trace().real
    kwargs = {}
    if tail_tol is None and isinstance(rho0, DensityMatrix):
        kwargs["tail_tol"] = rho0.tail_tol
    elif tail_tol is not None:
        kwargs["tail_tol"] = tail_tol
    return DensityMatrix(decomp.space, out, **kwargs)
