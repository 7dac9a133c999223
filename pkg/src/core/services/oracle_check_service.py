"""
Oracle Check Service for EntLaser

Property suites that cross-validate the Gaussian engine, the Fock oracle
and the witness sampler against each other and against closed-form laws.
Each property reports its measured deviation next to the tolerance it is
held to.
"""

import math
import time
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy import sparse

from ..exceptions import PropertyCheckError, ValidationError
from ..models import (
    CovarianceState,
    OracleSuite,
    PropertyResult,
    SeparableGenerator,
    Tolerances,
)
from ..stokes import (
    AH,
    AV,
    BH,
    BV,
    c_basis_transform,
    jay_quadratic_forms,
    symplectic_form,
)
from .fock_oracle import FockOracleService
from .gaussian_engine import GaussianEngineService, mismatch_j2
from .logging import get_logger, get_logging_service
from .settings_config_service import get_settings_service
from .witness_service import (
    WitnessService,
    balanced_loss_ratio,
    critical_transmission,
    loss_transform_analytic,
)

DEFAULT_CUTOFFS: Dict[OracleSuite, int] = {
    OracleSuite.SEPARABILITY: 4,
    OracleSuite.J_BOUND: 4,
    OracleSuite.ROTATION: 4,
    OracleSuite.CHANNEL_COMPOSITION: 3,
    OracleSuite.ALGEBRA: 4,
}
DEFAULT_COUNTS: Dict[OracleSuite, int] = {
    OracleSuite.SEPARABILITY: 10_000,
    OracleSuite.J_BOUND: 1_000,
    OracleSuite.ROTATION: 5,
    OracleSuite.CHANNEL_COMPOSITION: 3,
}
BALANCED_ETAS = (0.2, 1.0 / 3.0, 0.5, 0.9)
LOSS_GRID = (0.2, 1.0 / 3.0, 0.5, 0.75, 0.9)
ENGINE_ORACLE_TAU = 0.5
MISMATCH_TAU = 0.4
# (name, phi, f)
MISMATCH_CASES = (
    ("phase_mismatch", 0.3, 1.0),
    ("amplitude_mismatch", 0.0, 0.8),
    ("combined_mismatch", 0.4, 1.2),
)
ROTATION_ANGLE = math.pi / 7.0
LOSS_LAW_TAU = 0.3
EQUIVALENCE_TOL = 1e-6


def _relative(measured: float, expected: float) -> float:
    return abs(measured - expected) / max(1.0, abs(expected))


def _max_abs(matrix) -> float:
    if sparse.issparse(matrix):
        return float(abs(matrix).max()) if matrix.nnz else 0.0
    return float(np.max(np.abs(matrix))) if matrix.size else 0.0


def _overlap_defect(first, second) -> float:
    overlap = abs(np.vdot(first.amplitudes, second.amplitudes)) ** 2
    return 1.0 - overlap / (first.norm**2 * second.norm**2)


def form_bracket(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """G of the commutator [O1, O2] = i O3 of two quadratic forms."""
    omega = symplectic_form()
    return first @ omega @ second - second @ omega @ first


def coherent_means(alphas) -> np.ndarray:
    """c-basis quadrature means of a product coherent state given in the a/b basis."""
    c = c_basis_transform() @ np.asarray(alphas, dtype=complex)
    means = np.zeros(2 * len(c))
    means[0::2] = math.sqrt(2.0) * c.real
    means[1::2] = math.sqrt(2.0) * c.imag
    return means


def validate_suite(name: str) -> OracleSuite:
    try:
        return OracleSuite(name)
    except ValueError as e:
        allowed = ", ".join(suite.value for suite in OracleSuite)
        raise ValidationError(f"unknown suite '{name}'; choose from {allowed}") from e


class OracleCheckService:
    """Runs the oracle-check property suites"""

    def __init__(self, tolerances: Optional[Tolerances] = None):
        self.tolerances = tolerances or get_settings_service().get_tolerances()
        self.engine = GaussianEngineService(self.tolerances)
        self.oracle = FockOracleService(self.tolerances)
        self.witness = WitnessService(self.tolerances)
        self.logger = get_logger("oracle_check")
        self._suites: Dict[OracleSuite, Callable[..., List[PropertyResult]]] = {
            OracleSuite.ENGINE_VS_ORACLE: self.engine_vs_oracle,
            OracleSuite.SEPARABILITY: self.separability,
            OracleSuite.J_BOUND: self.j_bound,
            OracleSuite.LOSS_LAW: self.loss_law,
            OracleSuite.ROTATION: self.rotation,
            OracleSuite.CHANNEL_COMPOSITION: self.channel_composition,
            OracleSuite.ALGEBRA: self.algebra,
        }

    def default_cutoff(self, suite: OracleSuite) -> int:
        if suite is OracleSuite.ENGINE_VS_ORACLE:
            return self.tolerances.pure_cutoff
        if suite is OracleSuite.LOSS_LAW:
            return self.tolerances.density_cutoff
        return DEFAULT_CUTOFFS[suite]

    def run(
        self,
        suite: OracleSuite,
        seed: int = 0,
        cutoff: Optional[int] = None,
        count: Optional[int] = None,
    ) -> List[PropertyResult]:
        """Run one suite and log every property result."""
        suite = OracleSuite(suite)
        cutoff = cutoff or self.default_cutoff(suite)
        self.oracle.operators(cutoff)
        started = time.perf_counter()
        if suite in DEFAULT_COUNTS:
            count = count or DEFAULT_COUNTS[suite]
            results = self._suites[suite](seed, cutoff, count)
        else:
            results = self._suites[suite](seed, cutoff)

        logging_service = get_logging_service()
        for result in results:
            logging_service.log_property(
                result.suite,
                result.name,
                result.deviation,
                result.tolerance,
                result.passed,
                seed=result.seed,
            )
        logging_service.log_performance(
            f"oracle.{suite.value}",
            int((time.perf_counter() - started) * 1000),
            cutoff=cutoff,
            properties=len(results),
        )
        return results

    def assert_passed(self, results: List[PropertyResult]):
        failed = [result for result in results if not result.passed]
        if failed:
            summary = ", ".join(
                f"{r.suite}.{r.name} (deviation {r.deviation:.3e} > {r.tolerance:.1e})"
                for r in failed
            )
            raise PropertyCheckError(f"{len(failed)} failed: {summary}")

    def _result(
        self,
        suite: OracleSuite,
        name: str,
        deviation: float,
        tolerance: float,
        seed: Optional[int] = None,
        **details,
    ) -> PropertyResult:
        deviation = float(deviation)
        return PropertyResult(
            suite=suite.value,
            name=name,
            deviation=deviation,
            tolerance=tolerance,
            passed=bool(deviation <= tolerance),
            seed=seed,
            details=details,
        )

    # ---- suites ----

    def engine_vs_oracle(self, seed: int, cutoff: int) -> List[PropertyResult]:
        suite = OracleSuite.ENGINE_VS_ORACLE
        tau, tol = ENGINE_ORACLE_TAU, EQUIVALENCE_TOL
        ops = self.oracle.operators(cutoff)
        gaussian = self.engine.ideal_state(tau)
        ideal = self.oracle.build_ideal_state(tau, cutoff)
        results = []

        n_engine = self.engine.expect_number(gaussian)
        n_oracle = self.oracle.expectation(ideal, ops.N)
        deviation = abs(n_oracle - n_engine) / n_engine
        results.append(
            self._result(suite, "photon_number", deviation, tol, tau=tau, cutoff=cutoff)
        )

        # <J^2> vanishes on both sides, so compare on the scale of <N>
        j2_engine = self.engine.expect_J2(gaussian)
        j2_oracle = self.oracle.expectation(ideal, ops.J2)
        deviation = abs(j2_oracle - j2_engine) / max(1.0, n_engine)
        results.append(self._result(suite, "total_spin", deviation, tol, tau=tau))

        ja2_engine = self.engine.expect_arm_J2(gaussian, "A")
        ja2_oracle = self.oracle.expectation(ideal, ops.JA2)
        deviation = _relative(ja2_oracle, ja2_engine)
        results.append(self._result(suite, "arm_spin", deviation, tol, tau=tau))

        sigma_oracle = self.oracle.covariance_from_state(ideal).sigma
        scale = max(1.0, float(np.max(np.abs(gaussian.sigma))))
        deviation = np.max(np.abs(sigma_oracle - gaussian.sigma)) / scale
        results.append(self._result(suite, "covariance", deviation, tol, tau=tau))

        hamiltonian = self.oracle.build_hamiltonian(1.0, 0.0, 1.0, cutoff)
        vacuum = self.oracle.fock_state((0, 0, 0, 0), cutoff)
        evolved = self.oracle.evolve_exact(vacuum, hamiltonian, tau)
        deviation = _overlap_defect(ideal, evolved)
        results.append(
            self._result(suite, "hamiltonian_evolution", deviation, tol, tau=tau)
        )

        # Stokes means need a state with non-zero amplitudes
        rng = np.random.default_rng(seed)
        alphas = 0.4 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
        coherent = self.oracle.coherent_state(alphas, cutoff)
        means = coherent_means(alphas)
        moments = CovarianceState(0.5 * np.eye(len(means)) + np.outer(means, means))
        j_z, j_x, j_y = jay_quadratic_forms()
        form_means = np.array(
            [self.engine.expect_quadratic(moments, form) for form in (j_x, j_y, j_z)]
        )
        deviation = np.max(np.abs(self.oracle.stokes_vector(coherent) - form_means))
        results.append(self._result(suite, "stokes_means", deviation, tol, seed=seed))

        sigma_coherent = self.oracle.covariance_from_state(coherent).sigma
        deviation = np.max(np.abs(sigma_coherent - moments.sigma))
        results.append(
            self._result(suite, "coherent_moments", deviation, tol, seed=seed)
        )

        for name, phi, f in MISMATCH_CASES:
            deviation = self.mismatch_agreement(MISMATCH_TAU, phi, f, cutoff)
            results.append(
                self._result(suite, name, deviation, tol, phi=phi, f=f, tau=MISMATCH_TAU)
            )

        ratio = MISMATCH_CASES[1][2]
        grow_a = math.exp(2.0 * MISMATCH_TAU)
        grow_b = math.exp(2.0 * ratio * MISMATCH_TAU)
        closed_form = mismatch_j2(0.5 * grow_a, 0.5 / grow_a, 0.5 * grow_b, 0.5 / grow_b)
        j2_engine = self.engine.expect_J2(self.engine.ideal_state(MISMATCH_TAU, ratio))
        deviation = _relative(j2_engine, closed_form)
        results.append(
            self._result(suite, "mismatch_closed_form", deviation, tol, f=ratio)
        )
        return results

    def mismatch_agreement(
        self, tau: float, phi: float, f: float, cutoff: int
    ) -> float:
        """
        Largest gap in <N>, <J^2> and <J_i> between the mismatched Hamiltonian
        run on the vacuum in Fock space and the Gaussian ideal state with the
        same amplitude ratio, rotated by the phase mismatch. Gaps are taken
        relative to max(1, <N>).
        """
        ops = self.oracle.operators(cutoff)
        hamiltonian = self.oracle.build_hamiltonian(1.0, phi, f, cutoff)
        vacuum = self.oracle.fock_state((0, 0, 0, 0), cutoff)
        exact = self.oracle.evolve_exact(vacuum, hamiltonian, tau)
        gaussian = self.engine.ideal_state(tau, f)
        gaussian = self.engine.apply_phase_mismatch(gaussian, phi)

        j_z, j_x, j_y = jay_quadratic_forms()
        engine_values = [
            self.engine.expect_number(gaussian),
            self.engine.expect_J2(gaussian),
        ] + [self.engine.expect_quadratic(gaussian, form) for form in (j_x, j_y, j_z)]
        oracle_values = [
            self.oracle.expectation(exact, ops.N),
            self.oracle.expectation(exact, ops.J2),
        ] + list(self.oracle.stokes_vector(exact))
        gap = np.max(np.abs(np.subtract(oracle_values, engine_values)))
        return float(gap / max(1.0, engine_values[0]))

    def separability(self, seed: int, cutoff: int, count: int) -> List[PropertyResult]:
        suite = OracleSuite.SEPARABILITY
        tol = self.tolerances.separable_tol
        ops = self.oracle.operators(cutoff)
        results = []

        for offset, generator in enumerate(SeparableGenerator):
            samples = self.witness.sample_separable(
                generator, seed + offset, count, cutoff
            )
            worst = min(samples, key=lambda sample: sample.ratio)
            results.append(
                self._result(
                    suite,
                    f"min_ratio_{generator.value}",
                    max(0.0, 0.5 - worst.ratio),
                    tol,
                    seed=seed + offset,
                    count=count,
                    min_ratio=worst.ratio,
                    witness=worst.description,
                )
            )

        deviation = 0.0
        for twice_j in range(1, cutoff + 1):
            state = self.witness.extremal_product_state(0.5 * twice_j, cutoff)
            j2 = self.oracle.expectation(state, ops.J2)
            n = self.oracle.expectation(state, ops.N)
            deviation = max(deviation, abs(j2 / n - 0.5))
        results.append(
            self._result(suite, "extremal_family", deviation, 1e-12, cutoff=cutoff)
        )

        # arm-level moments agree with the four-mode operators
        rng = np.random.default_rng(seed)
        arm_a = self.witness.random_arm_states(cutoff, rng, 4)
        arm_b = self.witness.random_arm_states(cutoff, rng, 4)
        j2_arms, n_arms = self.witness.product_moments(arm_a, arm_b, cutoff)
        deviation = 0.0
        for i in range(len(arm_a)):
            state = self.oracle.product_state(arm_a[i], arm_b[i], cutoff)
            deviation = max(
                deviation,
                _relative(self.oracle.expectation(state, ops.J2), j2_arms[i]),
                _relative(self.oracle.expectation(state, ops.N), n_arms[i]),
            )
        results.append(
            self._result(suite, "arm_factorization", deviation, 1e-10, seed=seed)
        )
        return results

    def j_bound(self, seed: int, cutoff: int, count: int) -> List[PropertyResult]:
        suite = OracleSuite.J_BOUND
        tol = self.tolerances.bound_tol
        rng = np.random.default_rng(seed)

        worst, failures = -math.inf, 0
        for _ in range(count):
            state = self.oracle.random_state(cutoff, rng)
            lhs, rhs, ok = self.oracle.check_j_bound(state)
            worst = max(worst, lhs - rhs)
            failures += not ok
        results = [
            self._result(
                suite,
                "pure_states",
                max(0.0, worst),
                tol,
                seed=seed,
                count=count,
                failures=failures,
            )
        ]

        dimension = self.oracle.operators(cutoff).dimension
        if dimension**2 <= self.tolerances.max_density_elements:
            worst = -math.inf
            for _ in range(max(1, count // 100)):
                lhs, rhs, _ = self.oracle.check_j_bound(
                    self.oracle.random_density(cutoff, rng)
                )
                worst = max(worst, lhs - rhs)
            results.append(
                self._result(suite, "mixed_states", max(0.0, worst), tol, seed=seed)
            )
        return results

    def loss_law(self, seed: int, cutoff: int) -> List[PropertyResult]:
        suite = OracleSuite.LOSS_LAW
        tau = LOSS_LAW_TAU
        ops = self.oracle.operators(cutoff)
        rho = self.oracle.to_density(self.oracle.build_ideal_state(tau, cutoff))
        j2a = self.oracle.expectation(rho, ops.JA2)
        n_ideal = self.oracle.expectation(rho, ops.N)
        gaussian = self.engine.ideal_state(tau)
        results = []

        deviation = 0.0
        for eta_a in LOSS_GRID:
            for eta_b in LOSS_GRID:
                lossy = self.oracle.apply_loss_channel(
                    rho, (eta_a, eta_a, eta_b, eta_b)
                )
                j2, n = loss_transform_analytic(j2a, n_ideal, eta_a, eta_b)
                deviation = max(
                    deviation,
                    _relative(self.oracle.expectation(lossy, ops.J2), j2),
                    _relative(self.oracle.expectation(lossy, ops.N), n),
                )
        results.append(
            self._result(
                suite,
                "two_arm_transform",
                deviation,
                EQUIVALENCE_TOL,
                tau=tau,
                cutoff=cutoff,
            )
        )

        engine_dev, oracle_dev = 0.0, 0.0
        for eta in BALANCED_ETAS:
            expected = balanced_loss_ratio(eta)
            engine_ratio = self.engine.witness(
                self.engine.apply_loss(gaussian, [eta] * 4)
            ).ratio
            lossy = self.oracle.apply_loss_channel(rho, [eta] * 4)
            oracle_ratio = self.oracle.expectation(
                lossy, ops.J2
            ) / self.oracle.expectation(lossy, ops.N)
            engine_dev = max(engine_dev, abs(engine_ratio - expected))
            oracle_dev = max(oracle_dev, abs(oracle_ratio - expected))
        results.append(self._result(suite, "balanced_engine", engine_dev, 1e-8))
        results.append(
            self._result(suite, "balanced_oracle", oracle_dev, EQUIVALENCE_TOL)
        )

        boundary = self.engine.witness(
            self.engine.apply_loss(gaussian, [critical_transmission()] * 4)
        )
        results.append(
            self._result(
                suite,
                "critical_transmission",
                abs(boundary.ratio - 0.5),
                1e-8,
                entangled=boundary.entangled,
            )
        )
        return results

    def rotation(self, seed: int, cutoff: int, count: int) -> List[PropertyResult]:
        suite = OracleSuite.ROTATION
        tol = 1e-8
        rng = np.random.default_rng(seed)
        ops = self.oracle.operators(cutoff)

        invariant_dev, vector_dev = 0.0, 0.0
        for _ in range(count):
            state = self.oracle.random_state(cutoff, rng)
            angle = float(rng.uniform(-math.pi, math.pi))
            rotated = self.oracle.rotate_polarization(state, angle)
            for operator in (ops.J2, ops.N):
                before = self.oracle.expectation(state, operator)
                after = self.oracle.expectation(rotated, operator)
                invariant_dev = max(invariant_dev, _relative(after, before))

            # exp(-2i angle J_y) turns the Stokes vector by 2 angle about y
            jx, jy, jz = self.oracle.stokes_vector(state)
            cos, sin = math.cos(2.0 * angle), math.sin(2.0 * angle)
            expected = np.array([cos * jx + sin * jz, jy, cos * jz - sin * jx])
            measured = self.oracle.stokes_vector(rotated)
            vector_dev = max(vector_dev, float(np.max(np.abs(measured - expected))))

        ideal = self.oracle.build_ideal_state(LOSS_LAW_TAU, cutoff)
        turned = self.oracle.rotate_polarization(ideal, ROTATION_ANGLE)
        singlet_dev = _overlap_defect(ideal, turned)
        before = self.oracle.jz_distribution(ideal)
        after = self.oracle.jz_distribution(turned)
        distribution_dev = max(
            abs(before.get(m, 0.0) - after.get(m, 0.0))
            for m in set(before) | set(after)
        )
        j2_dev = abs(
            self.oracle.expectation(turned, ops.J2)
            - self.oracle.expectation(ideal, ops.J2)
        )
        return [
            self._result(suite, "invariants", invariant_dev, tol, seed=seed, count=count),
            self._result(suite, "stokes_rotation", vector_dev, tol, seed=seed),
            self._result(suite, "singlet_invariance", singlet_dev, tol, seed=seed),
            self._result(
                suite,
                "jz_distribution_invariance",
                max(distribution_dev, j2_dev),
                tol,
                angle=ROTATION_ANGLE,
            ),
        ]

    def channel_composition(
        self, seed: int, cutoff: int, count: int
    ) -> List[PropertyResult]:
        suite = OracleSuite.CHANNEL_COMPOSITION
        rng = np.random.default_rng(seed)

        composition_dev, trace_dev, identity_dev = 0.0, 0.0, 0.0
        for _ in range(count):
            rho = self.oracle.random_density(cutoff, rng)
            first = rng.uniform(0.1, 1.0, size=4)
            second = rng.uniform(0.1, 1.0, size=4)
            twice = self.oracle.apply_loss_channel(
                self.oracle.apply_loss_channel(rho, first), second
            )
            once = self.oracle.apply_loss_channel(rho, first * second)
            unchanged = self.oracle.apply_loss_channel(rho, np.ones(4))
            composition_dev = max(composition_dev, _max_abs(twice.matrix - once.matrix))
            trace_dev = max(trace_dev, abs(once.trace - rho.trace))
            identity_dev = max(identity_dev, _max_abs(unchanged.matrix - rho.matrix))

        gaussian = self.engine.ideal_state(LOSS_LAW_TAU)
        first = rng.uniform(0.1, 1.0, size=4)
        second = rng.uniform(0.1, 1.0, size=4)
        twice = self.engine.apply_loss(self.engine.apply_loss(gaussian, first), second)
        once = self.engine.apply_loss(gaussian, first * second)
        gaussian_dev = _max_abs(twice.sigma - once.sigma)
        return [
            self._result(suite, "fock_composition", composition_dev, 1e-12, seed=seed),
            self._result(
                suite, "trace_preserved", trace_dev, self.tolerances.trace_tol, seed=seed
            ),
            self._result(suite, "unit_transmission", identity_dev, 1e-15, seed=seed),
            self._result(suite, "gaussian_composition", gaussian_dev, 1e-12, seed=seed),
        ]

    def algebra(self, seed: int, cutoff: int) -> List[PropertyResult]:
        suite = OracleSuite.ALGEBRA
        ops = self.oracle.operators(cutoff)
        occ = ops.occupations
        arm_a, arm_b = occ[:, AH] + occ[:, AV], occ[:, BH] + occ[:, BV]
        # columns where the truncated Stokes operators are exact
        columns = np.flatnonzero((arm_a <= cutoff) & (arm_b <= cutoff))
        results = []

        jx, jy, jz = ops.jay
        deviation = 0.0
        for first, second, third in ((jx, jy, jz), (jy, jz, jx), (jz, jx, jy)):
            residue = first @ second - second @ first - 1j * third
            deviation = max(deviation, _max_abs(residue.tocsc()[:, columns]))
        results.append(
            self._result(suite, "fock_commutators", deviation, 1e-12, cutoff=cutoff)
        )

        casimir = sparse.diags(0.5 * arm_a * (0.5 * arm_a + 1.0)).tocsr()
        deviation = _max_abs((ops.JA2 - casimir).tocsc()[:, columns])
        results.append(
            self._result(suite, "schwinger_casimir", deviation, 1e-12, cutoff=cutoff)
        )

        deviation = max(
            _max_abs(operator - operator.conj().T)
            for operator in (*ops.jay, ops.J2, ops.N)
        )
        results.append(
            self._result(
                suite, "hermiticity", deviation, self.tolerances.hermiticity_tol
            )
        )

        g_z, g_x, g_y = (form.matrix for form in jay_quadratic_forms())
        deviation = max(
            _max_abs(form_bracket(g_x, g_y) - g_z),
            _max_abs(form_bracket(g_y, g_z) - g_x),
            _max_abs(form_bracket(g_z, g_x) - g_y),
        )
        results.append(self._result(suite, "form_commutators", deviation, 1e-12))

        omega = symplectic_form()
        u = c_basis_transform()
        paired = c_basis_transform("paired")
        deviation = max(
            _max_abs(omega @ omega + np.eye(len(omega))),
            _max_abs(u @ u.T - np.eye(len(u))),
            _max_abs(paired @ paired - np.eye(len(paired))),
        )
        results.append(self._result(suite, "basis_structure", deviation, 1e-15))

        vacuum = self.engine.vacuum_state()
        deviation = abs(self.engine.expect_J2(vacuum)) + abs(
            self.engine.expect_number(vacuum)
        )
        results.append(self._result(suite, "vacuum_moments", deviation, 1e-14))
        return results


# Global instance
_oracle_check_service: Optional[OracleCheckService] = None


def get_oracle_check_service() -> OracleCheckService:
    """Get the global oracle-check service instance"""
    global _oracle_check_service
    if _oracle_check_service is None:
        _oracle_check_service = OracleCheckService()
    return _oracle_check_service


def reset_oracle_check_service():
    """Reset the global oracle-check service instance. Useful for testing."""
    global _oracle_check_service
    _oracle_check_service = None
