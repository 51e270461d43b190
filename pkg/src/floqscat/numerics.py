"""Dense complex linear algebra used by every other module.

Matrices are plain complex128 numpy arrays in row-major layout.  The
routines here add the structure checks (Hermitian, unitary), deterministic
eigenvector conventions and diagnostics that the rest of the package relies
on.  Eigenvalue ordering is fixed: ascending for Hermitian input, ascending
principal argument in [0, 2pi) for unitary input, with exact ties broken by
a lexicographic comparison of the phase-fixed eigenvector entries, so two
runs on the same platform produce identical output.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.linalg.lapack import zgecon

HERMITIAN_RTOL = 1e-12
UNITARY_TOL = 1e-10
CLUSTER_GAP = 1e-8
PIVOT_RTOL = 1e-14


class SingularMatrixError(RuntimeError):
    """Raised when a solve hits a pivot below threshold (spectral point)."""


def as_complex_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def check_square(a: np.ndarray) -> np.ndarray:
    a = as_complex_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    return a


def hermitian_defect(a: np.ndarray) -> float:
    """max |A - A^H| entrywise."""
    return float(np.abs(a - a.conj().T).max())


def check_hermitian(a, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    a = check_square(a)
    scale = max(float(np.abs(a).max()), 1.0)
    defect = hermitian_defect(a)
    if defect > rtol * scale:
        raise ValueError(
            f"matrix is not Hermitian: max asymmetry {defect:.3e} "
            f"exceeds {rtol:.1e} x max|A| = {rtol * scale:.3e}"
        )
    return a


def unitary_defect(a: np.ndarray) -> float:
    """max |A^H A - I| entrywise."""
    n = a.shape[0]
    return float(np.abs(a.conj().T @ a - np.eye(n)).max())


def check_unitary(a, tol: float = UNITARY_TOL) -> np.ndarray:
    a = check_square(a)
    defect = unitary_defect(a)
    if defect > tol:
        raise ValueError(f"matrix is not unitary: |A^H A - I| = {defect:.3e} > {tol:.1e}")
    return a


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Deterministic eigenvector phase: largest-magnitude entry real positive."""
    out = vectors.copy()
    for k in range(out.shape[1]):
        idx = int(np.argmax(np.abs(out[:, k])))
        z = out[idx, k]
        if np.abs(z) > 0:
            out[:, k] *= np.conj(z) / np.abs(z)
    return out


def _lex_tiebreak(values: np.ndarray, vectors: np.ndarray, keys: np.ndarray):
    """Reorder columns inside runs of exactly equal sort keys lexicographically."""
    order = np.arange(len(keys))
    start = 0
    while start < len(keys):
        stop = start + 1
        while stop < len(keys) and keys[stop] == keys[start]:
            stop += 1
        if stop - start > 1:
            block = sorted(
                range(start, stop),
                key=lambda j: tuple(
                    np.round(np.concatenate([vectors[:, j].real, vectors[:, j].imag]), 12)
                ),
            )
            order[start:stop] = block
        start = stop
    return values[order], vectors[:, order]


@dataclass
class EigenDecomposition:
    """Eigenvalues plus orthonormal eigenvectors (columns)."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T

    def residual(self, a: np.ndarray) -> float:
        """max_k ||A v_k - mu_k v_k||_2."""
        r = a @ self.vectors - self.vectors * self.values
        return float(np.linalg.norm(r, axis=0).max())

    def orthonormality_defect(self) -> float:
        return unitary_defect(self.vectors)


def hermitian_eig(a, rtol: float = HERMITIAN_RTOL) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, values ascending.

    Backed by LAPACK (numpy.linalg.eigh) with the deterministic phase and
    tie-break conventions applied on top.
    """
    a = check_hermitian(a, rtol)
    values, vectors = np.linalg.eigh(a)
    vectors = _fix_phases(vectors)
    values, vectors = _lex_tiebreak(values, vectors, values)
    return EigenDecomposition(values=values, vectors=vectors)


def unitary_eig(u, tol: float = UNITARY_TOL, gap: float = CLUSTER_GAP) -> EigenDecomposition:
    """Eigendecomposition of a unitary matrix.

    Diagonalizes the commuting Hermitian pair C = (U + U^H)/2 and
    D = (U - U^H)/(2i): eigenvectors of C are grouped into clusters with gap
    tolerance `gap`, D is diagonalized inside each cluster, and the combined
    basis diagonalizes U.  This reuses the Hermitian solver and keeps the
    eigenvectors orthonormal even for tightly clustered eigenphases.
    Eigenvalues are sorted by principal argument in [0, 2pi).
    """
    u = check_unitary(u, tol)
    n = u.shape[0]
    c = (u + u.conj().T) / 2
    d = (u - u.conj().T) / 2j
    wc, vc = np.linalg.eigh(c)

    basis = np.empty_like(vc)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and wc[stop] - wc[stop - 1] <= gap:
            stop += 1
        block = vc[:, start:stop]
        if stop - start == 1:
            basis[:, start:stop] = block
        else:
            d_sub = block.conj().T @ d @ block
            d_sub = (d_sub + d_sub.conj().T) / 2
            _, rot = np.linalg.eigh(d_sub)
            basis[:, start:stop] = block @ rot
        start = stop

    values = np.einsum("ik,ij,jk->k", basis.conj(), u, basis)
    args = np.mod(np.angle(values), 2 * np.pi)
    order = np.argsort(args, kind="stable")
    values, basis, args = values[order], basis[:, order], args[order]
    basis = _fix_phases(basis)
    values, basis = _lex_tiebreak(values, basis, args)
    return EigenDecomposition(values=values, vectors=basis)


def expm_hermitian(h, tau: float) -> np.ndarray:
    """exp(-i tau H) for Hermitian H, unitary by construction.

    Computed through the eigendecomposition so each factor is exactly a
    phase; tau = 0 returns the identity exactly.
    """
    h = check_hermitian(h)
    if tau == 0.0:
        return np.eye(h.shape[0], dtype=np.complex128)
    eig = hermitian_eig(h)
    phases = np.exp(-1j * tau * eig.values)
    return (eig.vectors * phases) @ eig.vectors.conj().T


def solve(a, b, pivot_rtol: float = PIVOT_RTOL):
    """Solve A x = b by partial-pivot LU.  Returns (x, condition_estimate).

    Raises SingularMatrixError when a pivot falls below
    pivot_rtol * max row norm, which downstream code interprets as the
    shifted operator hitting a spectral point.
    """
    a = check_square(a)
    b = np.asarray(b, dtype=np.complex128)
    row_norm = float(np.abs(a).sum(axis=1).max())
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # pivot check below covers the singular case
            lu, piv = lu_factor(a)
    except np.linalg.LinAlgError as exc:  # exactly singular
        raise SingularMatrixError(f"factorization failed: {exc}") from exc
    pivots = np.abs(np.diag(lu))
    if row_norm == 0.0 or pivots.min() < pivot_rtol * row_norm:
        raise SingularMatrixError(
            f"pivot {pivots.min():.3e} below threshold "
            f"{pivot_rtol:.1e} x max row norm {row_norm:.3e}"
        )
    rcond, info = zgecon(lu, row_norm, norm="I")
    cond = float(1.0 / rcond) if rcond > 0 else np.inf
    if info != 0:
        raise SingularMatrixError(f"condition estimate failed (info={info})")
    x = lu_solve((lu, piv), b)
    return x, cond


def max_norm(a: np.ndarray) -> float:
    return float(np.abs(a).max())


def op_norm(a: np.ndarray) -> float:
    """Operator 2-norm (largest singular value)."""
    return float(np.linalg.norm(a, 2))
