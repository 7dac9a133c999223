"""
Tests for the truncated Fock-space oracle
"""

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import sparse
from scipy.sparse.linalg import expm_multiply

from src.core.exceptions import BudgetExceededError, PhysicalityError, ValidationError
from src.core.models import FockState
from src.core.services.fock_oracle import (
    FockOracleService,
    get_fock_oracle,
    ideal_state_cutoff,
    ideal_truncation_deficit,
    kraus_operators,
)
from src.core.stokes import fock_basis_index


def _photons(tau):
    return 4.0 * math.sinh(tau) ** 2


class TestIdealState:
    @pytest.mark.parametrize("tau, cutoff", [(0.3, 6), (0.8, 12)])
    def test_truncation_deficit_is_missing_norm(self, oracle, tau, cutoff):
        state = oracle.build_ideal_state(tau, cutoff)
        assert 1.0 - state.norm**2 == pytest.approx(state.truncation_deficit, abs=1e-13)

    def test_cutoff_search(self):
        cutoff = ideal_state_cutoff(0.8, 1e-9)
        assert ideal_truncation_deficit(0.8, cutoff) < 1e-9
        assert ideal_truncation_deficit(0.8, cutoff - 1) >= 1e-9

    def test_cutoff_search_gives_up(self):
        with pytest.raises(ValidationError):
            ideal_state_cutoff(3.0, 1e-12, max_cutoff=10)

    @pytest.mark.parametrize("tau", [0.3, 0.5, 0.8])
    def test_singlet_in_every_sector(self, oracle, tau):
        state = oracle.build_ideal_state(tau, 12)
        ops = oracle.operators(12)
        j2 = oracle.expectation(state, ops.J2)
        n = oracle.expectation(state, ops.N)
        assert j2 / n < 1e-8

    def test_photon_number_at_converged_cutoff(self, tolerances):
        tau = 0.8
        cutoff = ideal_state_cutoff(tau, 1e-9)
        oracle = FockOracleService(tolerances)
        state = oracle.build_ideal_state(tau, cutoff)
        n = oracle.expectation(state, oracle.operators(cutoff).N)
        assert abs(n - _photons(tau)) / _photons(tau) < 1e-6

    def test_jz_concentrated_at_zero(self, oracle):
        distribution = oracle.jz_distribution(oracle.build_ideal_state(0.5, 6))
        assert distribution == {0.0: pytest.approx(1.0)}

    def test_negative_tau(self, oracle):
        with pytest.raises(ValidationError):
            oracle.build_ideal_state(-1.0, 4)

    def test_truncation_warning_is_logged(self, oracle, mocker):
        warning = mocker.patch.object(oracle.logger, "warning")
        oracle.build_ideal_state(1.5, 3)
        warning.assert_called_once()
        assert warning.call_args.kwargs["cutoff"] == 3


class TestStates:
    def test_fock_state(self, oracle):
        state = oracle.fock_state((1, 0, 2, 0), 2)
        assert state.amplitudes[fock_basis_index((1, 0, 2, 0), 2)] == 1.0
        assert state.norm == 1.0

    def test_coherent_state_norm(self, oracle):
        state = oracle.coherent_state([0.3, 0.2j, 0.0, -0.1], 6)
        assert state.truncation_deficit < 1e-6
        assert state.norm**2 == pytest.approx(1.0 - state.truncation_deficit)

    def test_coherent_state_arity(self, oracle):
        with pytest.raises(ValidationError):
            oracle.coherent_state([0.1, 0.2], 3)

    def test_random_state_is_arm_limited(self, oracle, rng):
        state = oracle.random_state(3, rng)
        occ = oracle.operators(3).occupations
        outside = (occ[:, 0] + occ[:, 1] > 3) | (occ[:, 2] + occ[:, 3] > 3)
        assert np.all(state.amplitudes[outside] == 0)
        assert state.norm == pytest.approx(1.0)

    def test_random_density(self, oracle, rng):
        rho = oracle.random_density(2, rng)
        assert rho.trace == pytest.approx(1.0)
        assert np.allclose(rho.matrix, rho.matrix.conj().T)
        assert np.min(np.linalg.eigvalsh(rho.matrix)) > -1e-12

    def test_product_state_dimensions(self, oracle):
        with pytest.raises(ValidationError):
            oracle.product_state(np.ones(4), np.ones(9), 2)

    def test_density_budget(self, oracle):
        with pytest.raises(BudgetExceededError):
            oracle.to_density(oracle.fock_state((0, 0, 0, 0), 12))

    def test_dimension_budget(self, tolerances):
        small = FockOracleService(replace(tolerances, max_dimension=50))
        with pytest.raises(BudgetExceededError):
            small.fock_state((0, 0, 0, 0), 3)


class TestDynamics:
    def test_hamiltonian_is_hermitian(self, oracle):
        h = oracle.build_hamiltonian(0.7, 0.2, 1.1, 3)
        assert abs(h - h.conj().T).max() < 1e-14

    def test_evolution_from_vacuum_gives_ideal_state(self, oracle):
        tau, cutoff = 0.3, 8
        h = oracle.build_hamiltonian(1.0, 0.0, 1.0, cutoff)
        evolved = oracle.evolve_exact(oracle.fock_state((0, 0, 0, 0), cutoff), h, tau)
        ideal = oracle.build_ideal_state(tau, cutoff)
        overlap = abs(np.vdot(ideal.amplitudes, evolved.amplitudes)) ** 2
        assert overlap / ideal.norm**2 == pytest.approx(1.0, abs=1e-6)

    def test_krylov_matches_scipy(self, oracle, rng):
        cutoff = 3
        h = oracle.build_hamiltonian(0.5, 0.3, 0.9, cutoff)
        state = oracle.random_state(cutoff, rng)
        evolved = oracle.evolve_exact(state, h, 0.7)
        reference = expm_multiply(-1j * 0.7 * h.tocsc(), state.amplitudes)
        assert np.max(np.abs(evolved.amplitudes - reference)) < 1e-9

    def test_evolution_is_unitary(self, oracle, rng):
        h = oracle.build_hamiltonian(1.0, 0.0, 1.0, 3)
        evolved = oracle.evolve_exact(oracle.random_state(3, rng), h, 1.3)
        assert evolved.norm == pytest.approx(1.0, abs=1e-10)

    def test_zero_time(self, oracle, rng):
        state = oracle.random_state(2, rng)
        h = oracle.build_hamiltonian(1.0, 0.0, 1.0, 2)
        assert oracle.evolve_exact(state, h, 0.0) is state

    def test_operator_shape(self, oracle):
        state = oracle.fock_state((0, 0, 0, 0), 2)
        with pytest.raises(ValidationError):
            oracle.evolve_exact(state, sparse.identity(10, format="csr"), 1.0)

    def test_rotation_preserves_spin_length(self, oracle, rng):
        state = oracle.random_state(3, rng)
        rotated = oracle.rotate_polarization(state, 0.4)
        ops = oracle.operators(3)
        assert oracle.expectation(rotated, ops.J2) == pytest.approx(
            oracle.expectation(state, ops.J2), abs=1e-9
        )
        assert rotated.norm == pytest.approx(1.0, abs=1e-10)


class TestLossChannel:
    def test_kraus_completeness(self):
        kraus = kraus_operators(0.37, 5)
        total = np.einsum("kai,kaj->ij", kraus, kraus)
        assert np.allclose(total, np.eye(5), atol=1e-14)

    def test_single_photon_survival(self, oracle):
        rho = oracle.apply_loss_channel(oracle.fock_state((1, 0, 0, 0), 2), [0.3, 1, 1, 1])
        vacuum = fock_basis_index((0, 0, 0, 0), 2)
        one = fock_basis_index((1, 0, 0, 0), 2)
        assert rho.matrix[one, one].real == pytest.approx(0.3)
        assert rho.matrix[vacuum, vacuum].real == pytest.approx(0.7)
        assert rho.trace == pytest.approx(1.0)

    def test_full_loss(self, oracle, rng):
        rho = oracle.apply_loss_channel(oracle.random_state(2, rng), [0.0] * 4)
        vacuum = fock_basis_index((0, 0, 0, 0), 2)
        assert rho.matrix[vacuum, vacuum].real == pytest.approx(1.0)

    def test_rejects_bad_transmissions(self, oracle):
        state = oracle.fock_state((0, 0, 0, 0), 2)
        with pytest.raises(ValidationError):
            oracle.apply_loss_channel(state, [0.5, 0.5, 0.5, 1.5])

    def test_balanced_loss_law(self, oracle):
        tau, cutoff, eta = 0.3, 5, 0.5
        rho = oracle.apply_loss_channel(oracle.build_ideal_state(tau, cutoff), [eta] * 4)
        ops = oracle.operators(cutoff)
        ratio = oracle.expectation(rho, ops.J2) / oracle.expectation(rho, ops.N)
        assert ratio == pytest.approx(0.75 * (1.0 - eta), abs=1e-9)


class TestObservables:
    def test_vacuum_covariance(self, oracle):
        covariance = oracle.covariance_from_state(oracle.fock_state((0, 0, 0, 0), 2))
        assert np.allclose(covariance.sigma, 0.5 * np.eye(8), atol=1e-14)

    def test_ideal_state_covariance(self, oracle, engine):
        tau, cutoff = 0.4, 12
        covariance = oracle.covariance_from_state(oracle.build_ideal_state(tau, cutoff))
        assert np.allclose(covariance.sigma, engine.ideal_state(tau).sigma, atol=1e-6)

    def test_non_hermitian_expectation(self, oracle):
        state = oracle.coherent_state([0.5j, 0.0, 0.0, 0.0], 6)
        lowering = oracle.operators(6).annihilators[0]
        with pytest.raises(PhysicalityError):
            oracle.expectation(state, lowering)

    def test_zero_norm_state(self, oracle):
        state = FockState(np.zeros(81), cutoff=2)
        with pytest.raises(ValidationError):
            oracle.expectation(state, oracle.operators(2).N)

    def test_j_bound_on_random_states(self, oracle, rng):
        for _ in range(20):
            lhs, rhs, holds = oracle.check_j_bound(oracle.random_state(3, rng))
            assert holds, (lhs, rhs)

    def test_j_bound_is_tight_for_coherent_spin(self, oracle):
        # every photon in a_h: a spin-coherent state saturates the bound
        lhs, rhs, holds = oracle.check_j_bound(oracle.fock_state((3, 0, 0, 0), 3))
        assert holds
        assert lhs == pytest.approx(rhs)

    def test_stokes_vector_of_horizontal_photon(self, oracle):
        vector = oracle.stokes_vector(oracle.fock_state((1, 0, 0, 0), 2))
        assert np.allclose(vector, [0.0, 0.0, 0.5])

    def test_density_and_pure_expectations_agree(self, oracle, rng):
        state = oracle.random_state(2, rng)
        rho = oracle.to_density(state)
        ops = oracle.operators(2)
        assert oracle.expectation(rho, ops.J2) == pytest.approx(
            oracle.expectation(state, ops.J2)
        )

    def test_singleton(self):
        assert get_fock_oracle() is get_fock_oracle()
