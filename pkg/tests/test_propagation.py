import numpy as np
import pytest

from floqscat.model import PeriodicHamiltonian, rabi_closed_form_propagator, rabi_quasi_energies
from floqscat.numerics import expm_hermitian, max_norm, unitary_defect
from floqscat.propagation import (
    PropagatorSchedule,
    check_cocycle,
    check_period_shift,
    convergence_ladder,
    monodromy,
    propagate,
)

from conftest import random_hermitian


def constant_model(seed=1, dim=3):
    return PeriodicHamiltonian(h0=random_hermitian(dim, seed))


class TestPropagate:
    def test_identity_at_equal_times(self, rabi, fast_sched):
        assert np.array_equal(propagate(rabi, 0.3, 0.3, fast_sched), np.eye(2))

    def test_constant_hamiltonian(self, fast_sched):
        h = constant_model()
        u = propagate(h, 0.2, 1.5, fast_sched)
        assert np.abs(u - expm_hermitian(h.h0, 1.3)).max() < 1e-10

    @pytest.mark.parametrize("t", [0.3, 0.6, 1.0])
    def test_rabi_closed_form(self, rabi, accurate_sched, t):
        u = propagate(rabi, 0.0, t, accurate_sched)
        assert np.abs(u - rabi_closed_form_propagator(t)).max() < 1e-8

    def test_reverse_via_adjoint(self, rabi, fast_sched):
        u = propagate(rabi, 0.0, 0.7, fast_sched)
        assert np.array_equal(propagate(rabi, 0.7, 0.0, fast_sched), u.conj().T)

    def test_unitarity(self, fleet_models, fast_sched):
        for h in fleet_models:
            u = propagate(h, 0.0, 0.83, fast_sched)
            assert unitary_defect(u) <= 1e-10

    def test_schedule_validation(self):
        with pytest.raises(ValueError, match="order"):
            PropagatorSchedule(64, 3)
        with pytest.raises(ValueError, match="steps"):
            PropagatorSchedule(4, 2)


class TestMonodromy:
    def test_constant_hamiltonian(self, fast_sched):
        h = constant_model(seed=2)
        mono = monodromy(h, 0.0, fast_sched)
        assert np.abs(mono.operator - expm_hermitian(h.h0, 1.0)).max() < 1e-10

    def test_zero_hamiltonian(self, fast_sched):
        h = PeriodicHamiltonian(h0=np.zeros((3, 3)))
        assert np.abs(monodromy(h, 0.0, fast_sched).operator - np.eye(3)).max() < 1e-13

    def test_rabi_eigenphases(self, rabi, accurate_sched):
        mono = monodromy(rabi, 0.0, accurate_sched)
        got = np.sort(mono.quasi_energies)
        assert np.abs(got - rabi_quasi_energies(0.0, 1.0)).max() < 1e-8

    def test_unitary_and_unit_circle(self, fleet_models, fast_sched):
        for h in fleet_models:
            mono = monodromy(h, 0.0, fast_sched)
            assert unitary_defect(mono.operator) <= 1e-10
            assert np.abs(np.abs(mono.eig.values) - 1.0).max() <= 1e-10


class TestStructuralIdentities:
    def test_cocycle_r_equals_s(self, rabi, fast_sched):
        assert check_cocycle(rabi, 0.1, 0.1, 0.8, fast_sched) < 1e-12

    def test_cocycle_constant(self, fast_sched):
        assert check_cocycle(constant_model(seed=3), 0.0, 0.4, 1.1, fast_sched) <= 1e-10

    def test_cocycle_rabi(self, rabi, accurate_sched):
        assert check_cocycle(rabi, 0.0, 0.3, 1.0, accurate_sched) <= 1e-8

    def test_period_shift_zero(self, rabi, fast_sched):
        # t = 0: both sides are the one-period operator computed the same way
        assert check_period_shift(rabi, 0.0, fast_sched) <= 1e-12

    def test_period_shift_constant(self, fast_sched):
        assert check_period_shift(constant_model(seed=4), 0.8, fast_sched) <= 1e-10

    def test_period_shift_rabi(self, rabi, accurate_sched):
        assert check_period_shift(rabi, 0.6, accurate_sched) <= 1e-8

    def test_adjoint_symmetry(self, fleet_models, fast_sched):
        for h in fleet_models:
            u = propagate(h, 0.1, 0.9, fast_sched)
            v = propagate(h, 0.9, 0.1, fast_sched)
            assert np.abs(u.conj().T - v).max() <= 1e-10


class TestOrderOfAccuracy:
    @pytest.mark.parametrize("order", [2, 4])
    def test_ladder_ratio(self, rabi, order):
        study = convergence_ladder(rabi, order, steps=(64, 128, 256, 512))
        for ratio in study["ratios"]:
            assert 0.8 * 2**order <= ratio <= 1.2 * 2**order

    def test_floquet_mode_periodicity(self, rabi, accurate_sched):
        mono = monodromy(rabi, 0.0, accurate_sched)
        for k in range(2):
            lam = mono.quasi_energies[k]
            phi0 = mono.eig.vectors[:, k]
            psi1 = propagate(rabi, 0.0, 1.0, accurate_sched) @ phi0
            assert np.linalg.norm(np.exp(1j * lam) * psi1 - phi0) <= 1e-8
            # mid-period check of the factorization e^{i lam t} psi(t) periodic
            psi_t = propagate(rabi, 0.0, 0.4, accurate_sched) @ phi0
            psi_t1 = propagate(rabi, 0.0, 1.4, accurate_sched) @ phi0
            assert np.linalg.norm(np.exp(1j * lam) * psi_t1 - psi_t) <= 1e-8
