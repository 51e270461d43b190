"""Quasi-energy spectra, monodromy operators, periodic-boundary resolvents
and stroboscopic scattering for Hamiltonians with unit period."""

from .numerics import (
    EigenDecomposition,
    SingularMatrixError,
    expm_hermitian,
    hermitian_eig,
    solve,
    unitary_eig,
)
from .model import (
    LatticeModel,
    PeriodicHamiltonian,
    build_lattice,
    evaluate,
    fleet,
    fourier_modes,
    load_model,
    rabi_model,
    rabi_quasi_energies,
    save_model,
)
from .propagation import (
    Monodromy,
    PropagatorSchedule,
    check_cocycle,
    check_period_shift,
    monodromy,
    propagate,
)
from .floquet import (
    FloquetMatrix,
    QuasiEnergySpectrum,
    build_floquet,
    correspondence_report,
    quasi_spectrum,
    shift_commutation_defect,
    shift_group_defect,
)
from .resolvent import (
    BoundStateVerdict,
    FactorizedPotential,
    ThresholdProximityError,
    TimeGridFunction,
    block_q,
    bound_state_correspondence,
    factorized_potential,
    full_resolvent,
    q_factorized,
    r0_apply,
    r0_matrix,
)
from .scattering import (
    ConvergenceError,
    ProbeSet,
    ScatteringReport,
    WaveOperatorIterates,
    bound_state_scan,
    make_probes,
    s_matrix,
    stroboscopic_wave_op,
    time_averaged_wave_op,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
