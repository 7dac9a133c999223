"""
Witness Service for EntLaser

The polarization entanglement criterion <J^2>/<N> < 1/2, adversarial
sampling of separable states against it, and closed-form loss and
imperfection thresholds.
"""

import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import comb

from ..exceptions import ValidationError
from ..models import (
    FockState,
    SeparableGenerator,
    SeparableSample,
    ThresholdReport,
    Tolerances,
    WitnessReport,
)
from ..stokes import ArmOperatorSet, build_arm_operators
from .logging import get_logger
from .settings_config_service import get_settings_service

BOUNDARY = 0.5
# Ratios this close to the boundary are reported as not entangled.
_GUARD_BAND = 1e-12
_VACUUM_N = 1e-12


def criterion(j2: float, n: float) -> WitnessReport:
    """Entangled iff <J^2>/<N> < 1/2; <N> = 0 gives a vacuous report."""
    if not (math.isfinite(j2) and math.isfinite(n)):
        raise ValidationError(f"non-finite witness inputs j2={j2}, n={n}")
    if n < -_VACUUM_N:
        raise ValidationError(f"<N> must be non-negative, got {n}")
    if j2 < -1e-9 * max(1.0, abs(n)):
        raise ValidationError(f"<J^2> must be non-negative, got {j2}")
    j2 = max(j2, 0.0)
    if n <= _VACUUM_N:
        return WitnessReport(
            j2=j2,
            n=0.0,
            ratio=float("nan"),
            entangled=False,
            margin=float("nan"),
            vacuous=True,
        )
    ratio = j2 / n
    return WitnessReport(
        j2=j2,
        n=n,
        ratio=ratio,
        entangled=ratio < BOUNDARY - _GUARD_BAND,
        margin=BOUNDARY - ratio,
    )


def spin_bound_terms(j2a: float, j2b: float) -> Tuple[float, float]:
    """alpha = sqrt(<(J^A)^2> + 1/4) - 1/2 and its B-arm companion beta."""
    if j2a < 0 or j2b < 0:
        raise ValidationError("arm spin moments must be non-negative")
    return math.sqrt(j2a + 0.25) - 0.5, math.sqrt(j2b + 0.25) - 0.5


def _check_transmission(eta: float, name: str):
    if not 0.0 <= eta <= 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {eta}")


def loss_transform_analytic(
    j2a: float, n: float, eta_a: float, eta_b: float
) -> Tuple[float, float]:
    """
    <J^2> and <N> after arm transmissions (eta_a, eta_b) applied to the ideal
    state, given its <(J^A)^2> and <N>.
    """
    _check_transmission(eta_a, "eta_a")
    _check_transmission(eta_b, "eta_b")
    delta = eta_a - eta_b
    j2 = delta**2 * j2a + 0.375 * (eta_a * (1 - eta_a) + eta_b * (1 - eta_b)) * n
    return j2, 0.5 * (eta_a + eta_b) * n


def balanced_loss_ratio(eta: float) -> float:
    """Ratio of the ideal state after equal transmission eta in both arms."""
    _check_transmission(eta, "eta")
    return 0.75 * (1.0 - eta)


def critical_transmission() -> float:
    """Transmission at which balanced loss drives the ratio to 1/2."""
    return 1.0 / 3.0


def thresholds(n_mean: float, kappa: float) -> ThresholdReport:
    """Order-of-magnitude imperfection bounds, stated as equalities."""
    if not n_mean > 0:
        raise ValidationError(f"n_mean must be positive, got {n_mean}")
    if not kappa > 0:
        raise ValidationError(f"kappa must be positive, got {kappa}")
    root = math.sqrt(n_mean)
    return ThresholdReport(
        n_mean=n_mean,
        kappa=kappa,
        delta_eta_max=2.0 * math.sqrt(2.0) / root,
        delta_lambda_over_kappa_max=4.0 / root,
        phi_max_sqrt=4.0 / (math.sqrt(3.0) * root),
        phi_max_linear=4.0 / (math.sqrt(3.0) * n_mean),
        eta_critical=critical_transmission(),
    )


class WitnessService:
    """Separable-state sampling on single-arm spaces"""

    def __init__(self, tolerances: Optional[Tolerances] = None):
        self.tolerances = tolerances or get_settings_service().get_tolerances()
        self.logger = get_logger("witness")

    # ---- arm-state families, rows are states indexed by (n_h, n_v) ----

    def _fock_arms(self, arms: ArmOperatorSet, rng, size: int) -> np.ndarray:
        support = np.flatnonzero(arms.support)
        picks = rng.choice(support, size=size)
        states = np.zeros((size, arms.occupations.shape[0]), dtype=complex)
        states[np.arange(size), picks] = 1.0
        return states

    def _spin_coherent_arms(self, arms: ArmOperatorSet, rng, size: int) -> np.ndarray:
        """
        Spin-coherent states with photon number uniform in [0, cutoff] and
        axis uniform on the sphere.
        """
        cutoff = arms.cutoff
        radix = cutoff + 1
        photons = rng.integers(0, cutoff + 1, size=size)
        cos_theta = rng.uniform(-1.0, 1.0, size=size)
        azimuth = rng.uniform(0.0, 2.0 * math.pi, size=size)
        half = 0.5 * np.arccos(cos_theta)
        states = np.zeros((size, radix * radix), dtype=complex)
        for total in range(cutoff + 1):
            rows = np.flatnonzero(photons == total)
            if rows.size == 0:
                continue
            for k in range(total + 1):
                amplitude = (
                    math.sqrt(comb(total, k))
                    * np.cos(half[rows]) ** (total - k)
                    * (np.exp(1j * azimuth[rows]) * np.sin(half[rows])) ** k
                )
                states[rows, (total - k) * radix + k] = amplitude
        return states

    def _random_arms(self, arms: ArmOperatorSet, rng, size: int) -> np.ndarray:
        dimension = arms.occupations.shape[0]
        states = rng.standard_normal((size, dimension)) + 1j * rng.standard_normal(
            (size, dimension)
        )
        states[:, ~arms.support] = 0.0
        return states / np.linalg.norm(states, axis=1, keepdims=True)

    def _arm_moments(
        self, arms: ArmOperatorSet, states: np.ndarray
    ) -> Dict[str, np.ndarray]:
        def expect(matrix: np.ndarray) -> np.ndarray:
            return np.einsum("si,ij,sj->s", states.conj(), matrix, states).real

        m = arms.matrices
        return {
            "J": np.stack([expect(m[name]) for name in ("J_x", "J_y", "J_z")], axis=1),
            "J2": expect(m["J2"]),
            "N": expect(m["N"]),
        }

    def _product_moments(
        self, arms: ArmOperatorSet, arm_a: np.ndarray, arm_b: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        """<J^2> and <N> of product states |a>|b>."""
        a = self._arm_moments(arms, arm_a)
        b = self._arm_moments(arms, arm_b)
        j2 = a["J2"] + b["J2"] + 2.0 * np.sum(a["J"] * b["J"], axis=1)
        return j2, a["N"] + b["N"]

    def random_arm_states(self, cutoff: int, rng, size: int) -> np.ndarray:
        """Random pure single-arm states with n_h + n_v <= cutoff."""
        return self._random_arms(build_arm_operators(cutoff), rng, size)

    def product_moments(
        self, arm_a: np.ndarray, arm_b: np.ndarray, cutoff: int
    ) -> Tuple[np.ndarray, np.ndarray]:
        """<J^2> and <N> for rows of normalized single-arm vectors."""
        arms = build_arm_operators(cutoff)
        rows_a = np.atleast_2d(arm_a).astype(complex)
        rows_b = np.atleast_2d(arm_b).astype(complex)
        return self._product_moments(arms, rows_a, rows_b)

    def _draw_pairs(self, kind: str, arms: ArmOperatorSet, rng, size: int):
        draw = {
            "fock": self._fock_arms,
            "spin": self._spin_coherent_arms,
            "random": self._random_arms,
        }[kind]
        arm_a, arm_b = draw(arms, rng, size), draw(arms, rng, size)
        # redraw products with no photons at all
        while True:
            empty = np.flatnonzero(
                (np.abs(arm_a[:, 0]) > 1 - 1e-12) & (np.abs(arm_b[:, 0]) > 1 - 1e-12)
            )
            if empty.size == 0:
                return arm_a, arm_b
            arm_a[empty] = draw(arms, rng, empty.size)
            arm_b[empty] = draw(arms, rng, empty.size)

    def sample_separable(
        self,
        generator: SeparableGenerator,
        seed: int,
        count: int,
        cutoff: int,
    ) -> List[SeparableSample]:
        """
        Draw count separable states and evaluate their ratios.

        product_fock and product_coherent_spin give pure products; mixed_product
        gives Dirichlet-weighted mixtures of up to max_mixture_components
        products, each arm drawn from a random family.
        """
        if count < 1:
            raise ValidationError(f"count must be positive, got {count}")
        try:
            generator = SeparableGenerator(generator)
        except ValueError as e:
            raise ValidationError(f"unknown separable generator '{generator}'") from e
        arms = build_arm_operators(cutoff)
        rng = np.random.default_rng(seed)

        if generator is SeparableGenerator.PRODUCT_FOCK:
            pairs = self._draw_pairs("fock", arms, rng, count)
            j2, n = self._product_moments(arms, *pairs)
        elif generator is SeparableGenerator.PRODUCT_COHERENT_SPIN:
            pairs = self._draw_pairs("spin", arms, rng, count)
            j2, n = self._product_moments(arms, *pairs)
        else:
            j2, n = self._mixed_moments(arms, rng, count)

        ratios = j2 / n
        self.logger.info(
            "witness.sample",
            generator=generator.value,
            seed=seed,
            count=count,
            cutoff=cutoff,
            min_ratio=float(ratios.min()),
        )
        return [
            SeparableSample(
                generator=generator,
                seed=seed,
                index=i,
                ratio=float(ratios[i]),
                j2=float(j2[i]),
                n=float(n[i]),
            )
            for i in range(count)
        ]

    def _mixed_moments(self, arms: ArmOperatorSet, rng, count: int):
        components = self.tolerances.max_mixture_components
        used = rng.integers(1, components + 1, size=count)
        weights = rng.dirichlet(np.ones(components), size=count)
        weights[np.arange(components)[None, :] >= used[:, None]] = 0.0
        weights /= weights.sum(axis=1, keepdims=True)

        kinds = ("fock", "spin", "random")
        j2 = np.zeros(count)
        n = np.zeros(count)
        for slot in range(components):
            choice = rng.integers(0, len(kinds), size=count)
            slot_j2 = np.zeros(count)
            slot_n = np.zeros(count)
            for index, kind in enumerate(kinds):
                rows = np.flatnonzero(choice == index)
                if rows.size == 0:
                    continue
                part_j2, part_n = self._product_moments(
                    arms, *self._draw_pairs(kind, arms, rng, rows.size)
                )
                slot_j2[rows] = part_j2
                slot_n[rows] = part_n
            j2 += weights[:, slot] * slot_j2
            n += weights[:, slot] * slot_n
        return j2, n

    def extremal_product_state(self, j: float, cutoff: int) -> FockState:
        """|2j, 0, 0, 2j>, a separable state with ratio exactly 1/2."""
        photons = 2.0 * j
        if photons != int(photons) or photons < 1:
            raise ValidationError(f"j must be a positive half-integer, got {j}")
        photons = int(photons)
        if photons > cutoff:
            raise ValidationError(f"2j={photons} exceeds cutoff {cutoff}")
        from .fock_oracle import FockOracleService

        return FockOracleService(self.tolerances).fock_state(
            (photons, 0, 0, photons), cutoff
        )


# Global instance
_witness_service: Optional[WitnessService] = None


def get_witness_service() -> WitnessService:
    """Get the global witness service instance"""
    global _witness_service
    if _witness_service is None:
        _witness_service = WitnessService()
    return _witness_service


def reset_witness_service():
    """Reset the global witness service instance. Useful for testing."""
    global _witness_service
    _witness_service = None
