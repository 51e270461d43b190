"""Truncated Floquet Hamiltonian on mode space and its spectral structure.

The extended-space operator acts on vectors x = (x_n), |n| <= N, with
d-dimensional fiber blocks: the (n, m) block is H_{n-m} for n != m and
2 pi n I + H0 + H_0-mode on the diagonal.  Its eigenvalues are quasi-energies;
the commutation with the mode shift generates the 2pi translation structure,
and the interior folded spectrum reproduces the eigenphases of the one-period
operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import PeriodicHamiltonian
from .numerics import hermitian_eig, max_norm
from .propagation import Monodromy, PropagatorSchedule, monodromy

# edge rule: a state is truncation-corrupted when the norm fraction of its
# component in the outermost blocks exceeds 1% (i.e. probability 1e-4)
EDGE_NORM_LIMIT = 0.01
EDGE_BLOCKS = 2


@dataclass
class FloquetMatrix:
    """Truncated mode-space Hamiltonian on (2N+1) modes x d-dimensional fiber."""

    fiber_dim: int
    n_modes: int
    matrix: np.ndarray
    mode_diag: np.ndarray  # the 2 pi n block multipliers, length 2N+1
    source: PeriodicHamiltonian

    @property
    def size(self) -> int:
        return (2 * self.n_modes + 1) * self.fiber_dim

    def block(self, n: int, m: int) -> np.ndarray:
        d, n_ = self.fiber_dim, self.n_modes
        i, j = (n + n_) * d, (m + n_) * d
        return self.matrix[i:i + d, j:j + d]


def build_floquet(h: PeriodicHamiltonian, n_modes: int) -> FloquetMatrix:
    """Assemble the truncated mode-space matrix; requires N >= mode support."""
    if n_modes < h.max_mode:
        raise ValueError(
            f"mode cutoff N={n_modes} below the interaction support M={h.max_mode}; "
            "this would silently truncate the interaction"
        )
    d = h.dim
    nb = 2 * n_modes + 1
    out = np.zeros((nb * d, nb * d), dtype=np.complex128)
    diag_block = h.h0 + h.mode(0)
    for bi, n in enumerate(range(-n_modes, n_modes + 1)):
        out[bi * d:(bi + 1) * d, bi * d:(bi + 1) * d] = diag_block + 2 * np.pi * n * np.eye(d)
        for bj, m in enumerate(range(-n_modes, n_modes + 1)):
            if n == m:
                continue
            mode = h.modes.get(n - m)
            if mode is not None:
                out[bi * d:(bi + 1) * d, bj * d:(bj + 1) * d] = mode
    mode_diag = 2 * np.pi * np.arange(-n_modes, n_modes + 1, dtype=float)
    return FloquetMatrix(fiber_dim=d, n_modes=n_modes, matrix=out, mode_diag=mode_diag, source=h)


def _shift_matrix(k: FloquetMatrix) -> np.ndarray:
    """Truncated mode shift (S x)_n = x_{n-1} as a block matrix."""
    d, nb = k.fiber_dim, 2 * k.n_modes + 1
    s = np.zeros((nb * d, nb * d), dtype=np.complex128)
    for b in range(1, nb):
        s[b * d:(b + 1) * d, (b - 1) * d:b * d] = np.eye(d)
    return s


def shift_commutation_defect(k: FloquetMatrix) -> float:
    """Interior defect of K S - S K = 2 pi S on the truncated space.

    The relation is exact on the rows n in [-N+1, N] and columns
    m in [-N, N-1] where the truncated shift is defined; the defect there
    is zero in exact arithmetic and is returned in max norm.
    """
    d, n_ = k.fiber_dim, k.n_modes
    s = _shift_matrix(k)
    defect = k.matrix @ s - s @ k.matrix - 2 * np.pi * s
    interior = defect[d:, : -d] if n_ > 0 else defect
    return max_norm(interior)


def shift_group_defect(k: FloquetMatrix, sigma: float) -> float:
    """Defect of exp(i J sigma) S exp(-i J sigma) = exp(2 pi i sigma) S (interior)."""
    d, n_ = k.fiber_dim, k.n_modes
    s = _shift_matrix(k)
    phases = np.repeat(np.exp(1j * k.mode_diag * sigma), d)
    conj = (phases[:, None] * s) * phases.conj()[None, :]
    defect = conj - np.exp(2j * np.pi * sigma) * s
    interior = defect[d:, : -d] if n_ > 0 else defect
    return max_norm(interior)


@dataclass
class QuasiEnergySpectrum:
    """Eigenvalues of a truncated Floquet matrix with folding and edge flags."""

    values: np.ndarray          # ascending
    folded: np.ndarray          # values mod 2pi in [0, 2pi)
    vectors: np.ndarray         # columns, aligned with values
    interior: np.ndarray        # bool mask: not corrupted by the truncation edge
    n_modes: int
    fiber_dim: int

    @property
    def interior_folded(self) -> np.ndarray:
        return self.folded[self.interior]

    def mode_blocks(self, idx: int) -> np.ndarray:
        """Eigenvector idx reshaped to (2N+1, d) mode blocks."""
        return self.vectors[:, idx].reshape(2 * self.n_modes + 1, self.fiber_dim)

    def spatial_mass(self) -> np.ndarray:
        """Per-eigenvector fiber-site occupation, summed over modes: (d, n_eig)."""
        nb = 2 * self.n_modes + 1
        blocks = self.vectors.reshape(nb, self.fiber_dim, -1)
        return (np.abs(blocks) ** 2).sum(axis=0)


def quasi_spectrum(k: FloquetMatrix) -> QuasiEnergySpectrum:
    """Diagonalize the truncated Floquet matrix and fold to [0, 2pi).

    Eigenvectors whose component in the outermost EDGE_BLOCKS mode blocks
    per side exceeds EDGE_NORM_LIMIT of their norm are flagged as edge
    states and excluded from interior comparisons.
    """
    eig = hermitian_eig(k.matrix)
    d, nb = k.fiber_dim, 2 * k.n_modes + 1
    blocks = eig.vectors.reshape(nb, d, -1)
    probs = (np.abs(blocks) ** 2).sum(axis=1)
    edge = EDGE_BLOCKS if k.n_modes >= EDGE_BLOCKS else k.n_modes
    if edge > 0:
        edge_mass = probs[:edge].sum(axis=0) + probs[-edge:].sum(axis=0)
    else:
        edge_mass = np.zeros(probs.shape[1])
    interior = np.sqrt(edge_mass) <= EDGE_NORM_LIMIT
    return QuasiEnergySpectrum(
        values=eig.values,
        folded=np.mod(eig.values, 2 * np.pi),
        vectors=eig.vectors,
        interior=interior,
        n_modes=k.n_modes,
        fiber_dim=d,
    )


def circular_distance(a, b) -> np.ndarray:
    """Distance on the phase circle of circumference 2pi."""
    d = np.mod(np.asarray(a) - np.asarray(b), 2 * np.pi)
    return np.minimum(d, 2 * np.pi - d)


def reconstruct_mode(spec: QuasiEnergySpectrum, idx: int, t: float) -> np.ndarray:
    """Periodic eigenmode phi(t) = sum_n x_n exp(2 pi i n t) from mode blocks."""
    blocks = spec.mode_blocks(idx)
    ns = np.arange(-spec.n_modes, spec.n_modes + 1)
    phases = np.exp(2j * np.pi * ns * (float(t) % 1.0))
    return phases @ blocks


@dataclass
class CorrespondenceReport:
    """Comparison of interior folded quasi-energies with monodromy eigenphases."""

    n_modes: int
    theta_phases: np.ndarray          # quasi-energies of the one-period operator
    interior_folded: np.ndarray
    max_match_distance: float         # interior folded -> nearest theta phase
    mean_match_distance: float        # over the full truncated spectrum, edge included
    coverage_distance: float          # theta phase -> nearest interior folded
    counts: np.ndarray                # interior matches assigned to each theta phase
    mode_eigen_defect: float          # max || Theta phi(0) - e^{-i lambda} phi(0) ||


def correspondence_report(h: PeriodicHamiltonian, n_modes: int,
                          sched: PropagatorSchedule | None = None,
                          mono: Monodromy | None = None) -> CorrespondenceReport:
    """Check both halves of the spectral correspondence at mode cutoff N.

    Interior folded quasi-energies must reproduce the monodromy eigenphases
    as a multiset (each phase once per interior mode translate), and every
    interior eigenvector, resummed into a periodic mode phi(t), must satisfy
    the stroboscopic eigenvalue relation at t = 0.
    """
    mono = mono or monodromy(h, 0.0, sched)
    k = build_floquet(h, n_modes)
    spec = quasi_spectrum(k)
    if spec.interior.sum() == 0:
        raise ValueError("no interior quasi-energies: window too close to the truncation edge")
    theta_phases = np.sort(mono.quasi_energies)

    folded = spec.interior_folded
    dists = circular_distance(folded[:, None], theta_phases[None, :])
    nearest = np.argmin(dists, axis=1)
    max_match = float(dists[np.arange(len(folded)), nearest].max())
    counts = np.bincount(nearest, minlength=len(theta_phases))
    coverage = float(np.min(dists, axis=0).max()) if len(folded) else np.inf
    # full-spectrum mean: the edge fraction shrinks with N, so this decays
    # even after the interior values have converged to the noise floor
    all_d = circular_distance(spec.folded[:, None], theta_phases[None, :]).min(axis=1)
    mean_match = float(all_d.mean())

    defects = []
    lams = spec.values[spec.interior]
    for j, idx in enumerate(np.flatnonzero(spec.interior)):
        phi0 = reconstruct_mode(spec, idx, 0.0)
        norm = np.linalg.norm(phi0)
        if norm < 1e-12:
            continue
        resid = mono.operator @ phi0 - np.exp(-1j * lams[j]) * phi0
        defects.append(np.linalg.norm(resid) / norm)
    return CorrespondenceReport(
        n_modes=n_modes,
        theta_phases=theta_phases,
        interior_folded=np.sort(folded),
        max_match_distance=max_match,
        mean_match_distance=mean_match,
        coverage_distance=coverage,
        counts=counts,
        mode_eigen_defect=float(max(defects)) if defects else 0.0,
    )
