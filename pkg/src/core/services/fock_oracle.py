"""
Fock Oracle Service for EntLaser

Exact simulation of the four modes on a per-mode truncated Fock space:
closed-form ideal states, Hamiltonian evolution by Krylov exponentials,
photon loss as amplitude-damping Kraus channels, and observable
expectations. Small photon numbers only; it is the ground truth the
Gaussian engine is checked against.
"""

import math
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.linalg import eigh_tridiagonal
from scipy.special import comb

from ..exceptions import (
    BudgetExceededError,
    ConvergenceError,
    PhysicalityError,
    ValidationError,
)
from ..models import NUM_MODES, CovarianceState, FockDensity, FockState, Tolerances
from ..stokes import (
    AH,
    AV,
    BH,
    BV,
    FockOperatorSet,
    build_fock_operators,
    c_basis_transform,
    fock_basis_index,
    fock_dimension,
)
from .logging import get_logger
from .settings_config_service import get_settings_service

StateLike = Union[FockState, FockDensity]
OperatorLike = Union[sparse.spmatrix, np.ndarray]

_MAX_HALVINGS = 30


def ideal_truncation_deficit(tau: float, cutoff: int) -> float:
    """Probability weight of the ideal state in pair sectors above the cutoff."""
    x = math.tanh(tau) ** 2
    return (cutoff + 2) * x ** (cutoff + 1) - (cutoff + 1) * x ** (cutoff + 2)


def ideal_state_cutoff(tau: float, tol: float = 1e-10, max_cutoff: int = 200) -> int:
    """Smallest cutoff whose ideal-state truncation deficit is below tol."""
    for cutoff in range(1, max_cutoff + 1):
        if ideal_truncation_deficit(tau, cutoff) < tol:
            return cutoff
    raise ValidationError(
        f"no cutoff up to {max_cutoff} reaches deficit {tol} at tau={tau}"
    )


def kraus_operators(eta: float, radix: int) -> np.ndarray:
    """
    Single-mode loss Kraus operators stacked as [k, out, in] with
    <n-k|K_k|n> = sqrt(C(n,k)) eta^((n-k)/2) (1-eta)^(k/2).
    """
    kraus = np.zeros((radix, radix, radix))
    for k in range(radix):
        for n in range(k, radix):
            kraus[k, n - k, n] = math.sqrt(comb(n, k)) * np.power(
                eta, 0.5 * (n - k)
            ) * np.power(1.0 - eta, 0.5 * k)
    return kraus


class FockOracleService:
    """Truncated Fock-space ground truth"""

    def __init__(self, tolerances: Optional[Tolerances] = None):
        self.tolerances = tolerances or get_settings_service().get_tolerances()
        self.logger = get_logger("fock_oracle")

    def operators(self, cutoff: int) -> FockOperatorSet:
        return build_fock_operators(cutoff, self.tolerances.max_dimension)

    # ---- states ----

    def fock_state(self, occupation: Sequence[int], cutoff: int) -> FockState:
        """Number state |n_ah, n_av, n_bh, n_bv>."""
        dimension = self.operators(cutoff).dimension
        amplitudes = np.zeros(dimension, dtype=complex)
        amplitudes[fock_basis_index(occupation, cutoff)] = 1.0
        return FockState(amplitudes, cutoff)

    def build_ideal_state(self, tau: float, cutoff: int) -> FockState:
        """
        Amplitudes (-1)^m tanh^n(tau)/cosh^2(tau) on |n-m, m, m, n-m>,
        keeping complete pair sectors n <= cutoff.
        """
        if tau < 0:
            raise ValidationError(f"tau must be non-negative, got {tau}")
        dimension = self.operators(cutoff).dimension
        amplitudes = np.zeros(dimension, dtype=complex)
        t, c2 = math.tanh(tau), math.cosh(tau) ** 2
        for n in range(cutoff + 1):
            weight = t**n / c2
            for m in range(n + 1):
                index = fock_basis_index((n - m, m, m, n - m), cutoff)
                amplitudes[index] = (-1) ** m * weight
        deficit = ideal_truncation_deficit(tau, cutoff)
        if deficit > self.tolerances.truncation_warn:
            self.logger.warning(
                "oracle.truncation", tau=tau, cutoff=cutoff, deficit=deficit
            )
        return FockState(amplitudes, cutoff, truncation_deficit=deficit)

    def coherent_state(self, alphas: Sequence[complex], cutoff: int) -> FockState:
        """Product coherent state with amplitudes given in the a/b basis."""
        if len(alphas) != NUM_MODES:
            raise ValidationError(f"need 4 coherent amplitudes, got {len(alphas)}")
        self.operators(cutoff)
        n = np.arange(cutoff + 1)
        log_factorial = np.array([math.lgamma(k + 1) for k in n])
        amplitudes = np.ones(1, dtype=complex)
        for alpha in alphas:
            alpha = complex(alpha)
            single = np.exp(-0.5 * abs(alpha) ** 2 - 0.5 * log_factorial) * alpha**n
            amplitudes = np.kron(amplitudes, single)
        deficit = max(0.0, 1.0 - float(np.vdot(amplitudes, amplitudes).real))
        return FockState(amplitudes, cutoff, truncation_deficit=deficit)

    def random_state(
        self, cutoff: int, rng: np.random.Generator, arm_limited: bool = True
    ) -> FockState:
        """
        Spherically symmetric random pure state. With arm_limited the support
        is restricted to N_A <= cutoff and N_B <= cutoff, where the truncated
        Stokes operators are exact.
        """
        ops = self.operators(cutoff)
        amplitudes = rng.standard_normal(ops.dimension) + 1j * rng.standard_normal(
            ops.dimension
        )
        if arm_limited:
            occupations = ops.occupations
            inside = (occupations[:, AH] + occupations[:, AV] <= cutoff) & (
                occupations[:, BH] + occupations[:, BV] <= cutoff
            )
            amplitudes[~inside] = 0.0
        amplitudes /= np.linalg.norm(amplitudes)
        return FockState(amplitudes, cutoff)

    def random_density(
        self, cutoff: int, rng: np.random.Generator, rank: int = 3
    ) -> FockDensity:
        """Dirichlet-weighted mixture of random arm-limited pure states."""
        weights = rng.dirichlet(np.ones(rank))
        dimension = self._check_density_budget(cutoff)
        matrix = np.zeros((dimension, dimension), dtype=complex)
        for weight in weights:
            vector = self.random_state(cutoff, rng).amplitudes
            matrix += weight * np.outer(vector, vector.conj())
        return FockDensity(matrix, cutoff)

    def product_state(
        self, arm_a: np.ndarray, arm_b: np.ndarray, cutoff: int
    ) -> FockState:
        """Four-mode state from two single-arm vectors indexed by (n_h, n_v)."""
        expected = fock_dimension(cutoff, modes=2)
        if arm_a.size != expected or arm_b.size != expected:
            raise ValidationError(f"arm states must have {expected} amplitudes")
        self.operators(cutoff)
        return FockState(np.kron(arm_a, arm_b), cutoff)

    def _check_density_budget(self, cutoff: int) -> int:
        dimension = self.operators(cutoff).dimension
        elements = dimension * dimension
        if elements > self.tolerances.max_density_elements:
            raise BudgetExceededError(
                f"density matrix at cutoff {cutoff} needs {elements} elements, "
                f"budget is {self.tolerances.max_density_elements}",
                requested=elements,
                budget=self.tolerances.max_density_elements,
            )
        return dimension

    def to_density(self, state: StateLike) -> FockDensity:
        if isinstance(state, FockDensity):
            return state
        self._check_density_budget(state.cutoff)
        vector = state.amplitudes
        return FockDensity(
            np.outer(vector, vector.conj()),
            state.cutoff,
            truncation_deficit=state.truncation_deficit,
        )

    # ---- dynamics ----

    def build_hamiltonian(
        self, kappa: float, phi: float, f: float, cutoff: int
    ) -> sparse.csr_matrix:
        """i kappa (a_h^dag b_v^dag - f e^{i phi} a_v^dag b_h^dag) + h.c."""
        ops = self.operators(cutoff)
        creators = [a.conj().T.tocsr() for a in ops.annihilators]
        pair_one = creators[AH] @ creators[BV]
        pair_two = creators[AV] @ creators[BH]
        generator = 1j * kappa * (pair_one - f * np.exp(1j * phi) * pair_two)
        hamiltonian = (generator + generator.conj().T).tocsr()
        residue = hamiltonian - hamiltonian.conj().T
        asymmetry = abs(residue).max() if residue.nnz else 0.0
        if asymmetry > 1e-14 * max(1.0, abs(kappa)):
            raise PhysicalityError(f"Hamiltonian is not Hermitian (residue {asymmetry})")
        return hamiltonian

    def evolve_exact(self, state: FockState, H: OperatorLike, t: float) -> FockState:
        """
        exp(-i H t)|psi> by Lanczos-Krylov steps. Each step is accepted when
        its error estimate beta_m |e_m^T exp(-i dt T_m) e_1| is within its
        share of the tolerance; otherwise the step is halved.
        """
        if H.shape != (state.dimension, state.dimension):
            raise ValidationError(
                f"operator shape {H.shape} does not match "
                f"state dimension {state.dimension}"
            )
        if t == 0.0 or state.norm == 0.0:
            return state
        tol = self.tolerances.krylov_tol
        subspace = min(self.tolerances.krylov_max_subspace, state.dimension)
        vector = np.array(state.amplitudes)
        elapsed, step, halvings = 0.0, t, 0
        while elapsed < t:
            step = min(step, t - elapsed)
            candidate, error = _krylov_step(H, vector, step, subspace)
            if error <= tol * abs(step / t):
                vector = candidate
                elapsed += step
                continue
            halvings += 1
            if halvings > _MAX_HALVINGS:
                raise ConvergenceError(
                    f"Krylov exponential did not converge at t={elapsed:.6g} "
                    f"(residual {error:.3e}, tolerance {tol:.1e})",
                    residual=error,
                )
            step *= 0.5
        self.logger.debug(
            "krylov.evolve", t=t, halvings=halvings, dimension=state.dimension
        )
        return FockState(
            vector, state.cutoff, truncation_deficit=state.truncation_deficit
        )

    def rotate_polarization(self, state: FockState, angle: float) -> FockState:
        """Turn both polarization frames by angle, i.e. spin rotation 2*angle about y."""
        ops = self.operators(state.cutoff)
        return self.evolve_exact(state, ops.jay[1], 2.0 * angle)

    # ---- channels ----

    def apply_loss_channel(
        self, rho: StateLike, eta: Sequence[float]
    ) -> FockDensity:
        """Per-mode amplitude damping with transmissions ordered (a_h, a_v, b_h, b_v)."""
        eta = np.asarray(eta, dtype=float)
        if eta.shape != (NUM_MODES,):
            raise ValidationError(f"need 4 transmissions, got shape {eta.shape}")
        if np.any(eta < 0) or np.any(eta > 1):
            raise ValidationError(f"transmissions must lie in [0, 1], got {eta}")
        rho = self.to_density(rho)
        radix = rho.cutoff + 1
        tensor = rho.tensor()
        trace_before = rho.trace
        for mode, transmission in enumerate(eta):
            if transmission == 1.0:
                continue
            kraus = kraus_operators(float(transmission), radix)
            moved = np.moveaxis(tensor, (mode, mode + NUM_MODES), (0, 1))
            shape = moved.shape
            moved = np.einsum(
                "kai,ijr,kbj->abr",
                kraus,
                moved.reshape(radix, radix, -1),
                kraus,
                optimize=True,
            )
            tensor = np.moveaxis(moved.reshape(shape), (0, 1), (mode, mode + NUM_MODES))
        dimension = rho.dimension
        result = tensor.reshape(dimension, dimension)
        trace_after = float(np.trace(result).real)
        lost = trace_before - trace_after
        if abs(lost) > self.tolerances.trace_tol:
            self.logger.warning(
                "oracle.trace_loss", lost=lost, cutoff=rho.cutoff, eta=eta.tolist()
            )
        return FockDensity(
            result, rho.cutoff, truncation_deficit=rho.truncation_deficit + max(lost, 0.0)
        )

    # ---- observables ----

    def _moment(self, rho_or_state: StateLike, operator: OperatorLike) -> complex:
        dimension = rho_or_state.dimension
        if operator.shape != (dimension, dimension):
            raise ValidationError(
                f"operator shape {operator.shape} does not match dimension {dimension}"
            )
        if isinstance(rho_or_state, FockState):
            vector = rho_or_state.amplitudes
            weight = float(np.vdot(vector, vector).real)
            value = np.vdot(vector, operator @ vector)
        else:
            matrix = rho_or_state.matrix
            weight = rho_or_state.trace
            if sparse.issparse(operator):
                value = operator.multiply(matrix.T).sum()
            else:
                value = np.sum(operator * matrix.T)
        if weight <= 0.0:
            raise ValidationError("state has zero norm")
        return complex(value) / weight

    def expectation(self, rho_or_state: StateLike, operator: OperatorLike) -> float:
        """<O> normalized by the state's norm or trace; real part of a Hermitian O."""
        value = self._moment(rho_or_state, operator)
        if abs(value.imag) > self.tolerances.imag_tol * max(1.0, abs(value.real)):
            raise PhysicalityError(
                f"expectation has imaginary residue {value.imag:.3e}; "
                "operator not Hermitian or state corrupted"
            )
        return value.real

    def stokes_vector(self, rho_or_state: StateLike) -> np.ndarray:
        """(<J_x>, <J_y>, <J_z>)"""
        ops = self.operators(rho_or_state.cutoff)
        return np.array([self.expectation(rho_or_state, j) for j in ops.jay])

    def check_j_bound(self, rho_or_state: StateLike) -> Tuple[float, float, bool]:
        """|<J>| <= sqrt(<J^2> + 1/4) - 1/2"""
        ops = self.operators(rho_or_state.cutoff)
        lhs = float(np.linalg.norm(self.stokes_vector(rho_or_state)))
        j2 = self.expectation(rho_or_state, ops.J2)
        rhs = math.sqrt(max(j2, 0.0) + 0.25) - 0.5
        return lhs, rhs, lhs <= rhs + self.tolerances.bound_tol

    def jz_distribution(self, rho_or_state: StateLike) -> Dict[float, float]:
        """Probability of each J_z eigenvalue (J_z is diagonal in the number basis)."""
        ops = self.operators(rho_or_state.cutoff)
        if isinstance(rho_or_state, FockState):
            probabilities = np.abs(rho_or_state.amplitudes) ** 2
        else:
            probabilities = np.real(np.diag(rho_or_state.matrix))
        probabilities = probabilities / probabilities.sum()
        occ = ops.occupations
        twice_m = occ[:, AH] - occ[:, AV] + occ[:, BH] - occ[:, BV]
        offset = 2 * rho_or_state.cutoff
        totals = np.bincount(twice_m + offset, weights=probabilities)
        return {
            0.5 * (index - offset): float(p) for index, p in enumerate(totals) if p > 0.0
        }

    def covariance_from_state(self, rho_or_state: StateLike) -> CovarianceState:
        """
        Symmetrized (non-central) c-basis quadrature second moments.

        Ladder moments <a_k^dag a_l> and <a_k a_l> only lower inside the
        truncated space, so they are exact for any state on it.
        """
        ops = self.operators(rho_or_state.cutoff)
        lowering = ops.annihilators
        raising = [a.conj().T.tocsr() for a in lowering]
        normal = np.zeros((NUM_MODES, NUM_MODES), dtype=complex)
        anomalous = np.zeros((NUM_MODES, NUM_MODES), dtype=complex)
        for k in range(NUM_MODES):
            for l in range(NUM_MODES):
                normal[k, l] = self._moment(rho_or_state, raising[k] @ lowering[l])
                anomalous[k, l] = self._moment(rho_or_state, lowering[k] @ lowering[l])
        u = c_basis_transform()
        normal = u @ normal @ u.T
        anomalous = u @ anomalous @ u.T

        half = 0.5 * np.eye(NUM_MODES)
        xx = anomalous.real + normal.real + half
        pp = -anomalous.real + normal.real + half
        xp = anomalous.imag + normal.imag
        sigma = np.zeros((2 * NUM_MODES, 2 * NUM_MODES))
        sigma[0::2, 0::2] = xx
        sigma[1::2, 1::2] = pp
        sigma[0::2, 1::2] = xp
        sigma[1::2, 0::2] = xp.T
        return CovarianceState(0.5 * (sigma + sigma.T))


def _krylov_step(
    H: OperatorLike, vector: np.ndarray, dt: float, subspace: int
) -> Tuple[np.ndarray, float]:
    """One Lanczos approximation of exp(-i H dt) v with its error estimate."""
    norm = float(np.linalg.norm(vector))
    basis = np.zeros((subspace, vector.size), dtype=complex)
    basis[0] = vector / norm
    alpha = np.zeros(subspace)
    beta = np.zeros(subspace)
    size = subspace
    for j in range(subspace):
        w = H @ basis[j]
        alpha[j] = np.vdot(basis[j], w).real
        w = w - alpha[j] * basis[j]
        if j > 0:
            w = w - beta[j - 1] * basis[j - 1]
        # full reorthogonalization against the accepted vectors
        w = w - basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] < 1e-13 * max(1.0, abs(alpha[j])):
            size = j + 1
            beta[j] = 0.0
            break
        if j + 1 < subspace:
            basis[j + 1] = w / beta[j]

    if size == 1:
        coefficients = np.array([np.exp(-1j * dt * alpha[0])])
    else:
        eigenvalues, eigenvectors = eigh_tridiagonal(alpha[:size], beta[: size - 1])
        coefficients = eigenvectors @ (
            np.exp(-1j * dt * eigenvalues) * eigenvectors[0]
        )
    result = norm * (basis[:size].T @ coefficients)
    error = norm * beta[size - 1] * abs(coefficients[-1])
    return result, float(error)


# Global instance
_fock_oracle: Optional[FockOracleService] = None


def get_fock_oracle() -> FockOracleService:
    """Get the global oracle instance"""
    global _fock_oracle
    if _fock_oracle is None:
        _fock_oracle = FockOracleService()
    return _fock_oracle


def reset_fock_oracle():
    """Reset the global oracle instance. Useful for testing."""
    global _fock_oracle
    _fock_oracle = None
