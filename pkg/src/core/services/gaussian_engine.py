"""
Gaussian Engine Service for EntLaser

Propagates the 8x8 quadrature covariance of the four squeezer modes under
pump-depleted two-mode squeezing with per-arm loss, and evaluates the
polarization observables on the resulting zero-mean Gaussian state.

Second moments obey the linear moment equation

    dSigma/dt = A(t) Sigma + Sigma A(t)^T + D

which is exact for linear dynamics driven by delta-correlated vacuum noise.
Phase mismatch is not part of A: the mismatched evolution equals the ideal
one followed by a rotation of modes c3 and c4, applied by to_lab_frame().
"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from ..exceptions import (
    IntegrationError,
    PhysicalityError,
    QuadratureError,
    ValidationError,
)
from ..models import (
    NUM_MODES,
    QUADRATURE_DIM,
    CovarianceState,
    DriftSpec,
    QuadraticForm,
    Tolerances,
    WitnessReport,
)
from ..stokes import (
    arm_quadratic_forms,
    c_basis_transform,
    jay_quadratic_forms,
    number_quadratic_form,
    quadrature_transform,
    symplectic_form,
)
from .logging import get_logger
from .settings_config_service import get_settings_service
from .witness_service import criterion

# Growth (+1) or decay (-1) of each quadrature under the ideal squeezer,
# per unit of kappa. Modes c3 and c4 are scaled by the amplitude mismatch f.
_SQUEEZE_SIGNS = np.array([1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0])
_MISMATCH_MODES = np.array([1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0])


def squeeze_vector(f: float = 1.0) -> np.ndarray:
    """Diagonal squeezing rates per unit kappa, with c3/c4 scaled by f."""
    scale = _MISMATCH_MODES + f * (1.0 - _MISMATCH_MODES)
    return _SQUEEZE_SIGNS * scale


def loss_matrix(lambda_a: float, lambda_b: float) -> np.ndarray:
    """Per-arm amplitude loss rates conjugated into the c-basis quadratures."""
    u = c_basis_transform()
    rates = np.diag([lambda_a, lambda_a, lambda_b, lambda_b])
    return np.kron(u @ rates @ u.T, np.eye(2))


def mismatch_j2(x_a: float, p_a: float, x_b: float, p_b: float) -> float:
    """
    <J^2> when pair (c1, c2) has variances (x_a, p_a) and pair (c3, c4)
    has (x_b, p_b), with no cross correlations.
    """
    return 0.5 * (x_a * p_a + x_b * p_b) + x_a * p_b + x_b * p_a - 0.75


def ratio_correction_unbalanced(
    delta_lambda: float, kappa: float, n: float, coefficient: float = 3.0 / 32.0
) -> float:
    """
    Leading ratio excess from an arm loss imbalance, coefficient*(dl/kappa)^2*N.

    The imbalance correlates the two growing quadratures of each pair by
    c = -dl g / (4 kappa) and lifts each decaying variance by
    delta = dl^2 g / (16 kappa^2). All three Stokes components pick up both
    terms, so <J^2> gains 3c^2 + 3g delta and, with N = 2g, the
    ratio gains 3 dl^2 N / (32 kappa^2). Pass coefficient=1/32 for the
    single-component estimate.
    """
    return coefficient * (delta_lambda / kappa) ** 2 * n


def ratio_correction_phase(phi: float, n: float) -> float:
    """Leading ratio excess from a pump phase mismatch, phi^2 N / 16."""
    return phi**2 * n / 16.0


def balanced_quadrature_variance(
    sign: float,
    kappa0: float,
    Lambda: float,
    lam: float,
    t: float,
    epsabs: float = 1e-10,
    epsrel: float = 1e-12,
    limit: int = 200,
) -> float:
    """
    Closed-form second moment of one quadrature under balanced loss.

    <q^2>(t) = 1/2 e^{2K(t)} + lam * int_0^t e^{2(K(t)-K(s))} ds with
    K(t) = sign*(kappa0/Lambda)(1 - e^{-Lambda t}) - lam t.
    """
    if t < 0:
        raise ValidationError(f"time must be non-negative, got {t}")
    if t == 0:
        return 0.5

    if Lambda == 0.0:
        rate = sign * kappa0 - lam
        growth = math.exp(2.0 * rate * t)
        if lam == 0.0:
            return 0.5 * growth
        noise = math.expm1(2.0 * rate * t) / (2.0 * rate) if rate != 0.0 else t
        return 0.5 * growth + lam * noise

    def exponent(s: float) -> float:
        return sign * (kappa0 / Lambda) * -math.expm1(-Lambda * s) - lam * s

    k_end = exponent(t)
    if lam == 0.0:
        return 0.5 * math.exp(2.0 * k_end)

    result = integrate.quad(
        lambda s: math.exp(2.0 * (k_end - exponent(s))),
        0.0,
        t,
        epsabs=epsabs,
        epsrel=epsrel,
        limit=limit,
        full_output=1,
    )
    value, abserr = result[0], result[1]
    if len(result) > 3:
        raise QuadratureError(
            f"noise integral did not converge at t={t}: {result[3]}",
            error_estimate=abserr,
        )
    if abserr > max(epsabs, epsrel * abs(value)) * 10.0:
        raise QuadratureError(
            f"noise integral error {abserr:.3e} above tolerance at t={t}",
            error_estimate=abserr,
        )
    return 0.5 * math.exp(2.0 * k_end) + lam * value


class GaussianEngineService:
    """Covariance propagation and observable evaluation"""

    def __init__(self, tolerances: Optional[Tolerances] = None):
        self.tolerances = tolerances or get_settings_service().get_tolerances()
        self.logger = get_logger("gaussian_engine")
        self._omega = symplectic_form()

    # ---- states ----

    def vacuum_state(self, t: float = 0.0) -> CovarianceState:
        return CovarianceState.vacuum(t)

    def ideal_state(self, tau: float, f: float = 1.0) -> CovarianceState:
        """Lossless squeezed state after effective interaction time tau."""
        if tau < 0:
            raise ValidationError(f"tau must be non-negative, got {tau}")
        rates = squeeze_vector(f)
        return CovarianceState(np.diag(0.5 * np.exp(2.0 * rates * tau)), t=tau)

    # ---- dynamics ----

    def drift_and_diffusion(
        self, spec: DriftSpec, t: float
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Drift A(t) and diffusion D of the moment equation."""
        loss = loss_matrix(spec.lambda_a, spec.lambda_b)
        drift = np.diag(spec.kappa(t) * squeeze_vector(spec.f)) - loss
        return drift, loss.copy()

    def evolve_rk4(
        self,
        state: CovarianceState,
        spec: DriftSpec,
        t_end: float,
        h: Optional[float] = None,
    ) -> CovarianceState:
        """Fixed-step classical RK4 on the moment equation up to t_end."""
        h = self.tolerances.rk4_step if h is None else h
        span = t_end - state.t
        if span < 0:
            raise ValidationError(f"t_end={t_end} precedes state time {state.t}")
        if h <= 0:
            raise ValidationError(f"step must be positive, got {h}")
        if span == 0:
            return state
        if h > span:
            raise IntegrationError(
                f"step {h} exceeds the integration span {span}; use a smaller step"
            )
        sigma = self._integrate(state.sigma, state.t, t_end, h, spec)
        return CovarianceState(sigma, t_end)

    def evolve_trajectory(
        self,
        state: CovarianceState,
        spec: DriftSpec,
        sample_times: Sequence[float],
        h: Optional[float] = None,
    ) -> List[CovarianceState]:
        """
        Integrate through each sample time in order and return the state at
        every sample. The uncertainty relation is checked at each sample.
        """
        h = self.tolerances.rk4_step if h is None else h
        if h <= 0:
            raise ValidationError(f"step must be positive, got {h}")
        states = []
        current = state
        for t in sample_times:
            if t < current.t:
                raise ValidationError(
                    f"sample times must be non-decreasing and >= {state.t}"
                )
            if t > current.t:
                sigma = self._integrate(
                    current.sigma, current.t, t, min(h, t - current.t), spec
                )
                current = CovarianceState(sigma, t)
            self.check_uncertainty(current)
            states.append(current)
        return states

    def _integrate(
        self,
        sigma: np.ndarray,
        t0: float,
        t1: float,
        h: float,
        spec: DriftSpec,
    ) -> np.ndarray:
        span = t1 - t0
        steps = max(1, int(math.ceil(span / h * (1.0 - 1e-12))))
        dt = span / steps
        squeeze = squeeze_vector(spec.f)
        loss = loss_matrix(spec.lambda_a, spec.lambda_b)

        def rhs(s: np.ndarray, t: float) -> np.ndarray:
            drift = np.diag(spec.kappa(t) * squeeze) - loss
            return drift @ s + s @ drift.T + loss

        s = np.array(sigma, dtype=float)
        for i in range(steps):
            t = t0 + i * dt
            k1 = rhs(s, t)
            k2 = rhs(s + 0.5 * dt * k1, t + 0.5 * dt)
            k3 = rhs(s + 0.5 * dt * k2, t + 0.5 * dt)
            k4 = rhs(s + dt * k3, t + dt)
            s = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            s = 0.5 * (s + s.T)
            if not np.all(np.isfinite(s)):
                raise IntegrationError(
                    f"non-finite covariance at t={t + dt:.6g} "
                    f"(step {i + 1}/{steps}, dt={dt:.3g})"
                )
        self.logger.debug(
            "rk4.segment", t0=t0, t1=t1, steps=steps, dt=dt, kappa0=spec.kappa0
        )
        return s

    def evolve_analytic_balanced(
        self, spec: DriftSpec, t_end: float
    ) -> CovarianceState:
        """Closed-form diagonal covariance for equal arm losses and no mismatch."""
        if not spec.is_balanced:
            raise ValidationError(
                "closed-form evolution needs lambda_a == lambda_b, phi == 0 and f == 1"
            )
        tol = self.tolerances
        variances = {
            sign: balanced_quadrature_variance(
                sign,
                spec.kappa0,
                spec.Lambda,
                spec.lambda_a,
                t_end,
                epsabs=tol.quad_epsabs,
                epsrel=tol.quad_epsrel,
                limit=tol.quad_limit,
            )
            for sign in (1.0, -1.0)
        }
        diagonal = [variances[sign] for sign in _SQUEEZE_SIGNS]
        return CovarianceState(np.diag(diagonal), t_end)

    # ---- channels ----

    def apply_loss(self, state: CovarianceState, eta: Sequence[float]) -> CovarianceState:
        """Beam-splitter loss with per-mode transmissions in the a/b basis."""
        eta = np.asarray(eta, dtype=float)
        if eta.shape != (NUM_MODES,):
            raise ValidationError(f"need 4 transmissions, got shape {eta.shape}")
        if np.any(eta < 0) or np.any(eta > 1):
            raise ValidationError(f"transmissions must lie in [0, 1], got {eta}")
        transform = quadrature_transform()
        sigma_ab = transform.T @ state.sigma @ transform
        gain = np.repeat(np.sqrt(eta), 2)
        sigma_ab = gain[:, None] * sigma_ab * gain[None, :] + np.diag(
            0.5 * (1.0 - gain**2)
        )
        return state.with_sigma(transform @ sigma_ab @ transform.T)

    def apply_phase_mismatch(self, state: CovarianceState, phi: float) -> CovarianceState:
        """Rotate modes c3 and c4 by phi/2 in phase space."""
        if phi == 0.0:
            return state
        theta = 0.5 * phi
        block = np.array(
            [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
        )
        rotation = np.eye(QUADRATURE_DIM)
        rotation[4:6, 4:6] = block
        rotation[6:8, 6:8] = block
        return state.with_sigma(rotation @ state.sigma @ rotation.T)

    def to_lab_frame(self, state: CovarianceState, spec: DriftSpec) -> CovarianceState:
        return self.apply_phase_mismatch(state, spec.phi)

    # ---- observables ----

    def expect_quadratic(self, state: CovarianceState, form: QuadraticForm) -> float:
        return float(0.5 * np.sum(form.matrix * state.sigma) + form.constant)

    def expect_product(
        self, state: CovarianceState, first: QuadraticForm, second: QuadraticForm
    ) -> float:
        """
        <O1 O2> for two quadratic observables on a zero-mean Gaussian state,
        by Wick pairing of operator second moments M = Sigma + (i/2) Omega.
        """
        moments = state.sigma + 0.5j * self._omega
        g1, g2 = first.matrix, second.matrix
        tr1 = np.trace(g1 @ moments)
        tr2 = np.trace(g2 @ moments)
        quartic = 0.25 * (tr1 * tr2 + 2.0 * np.trace(moments.T @ g1 @ moments @ g2))
        value = (
            quartic
            + first.constant * 0.5 * tr2
            + second.constant * 0.5 * tr1
            + first.constant * second.constant
        )
        scale = max(1.0, float(np.max(np.abs(state.sigma))))
        if abs(value.imag) > self.tolerances.wick_imag_tol * scale:
            raise PhysicalityError(
                f"Wick product has imaginary residue {value.imag:.3e}; "
                "covariance may violate the uncertainty relation"
            )
        return float(value.real)

    def expect_J2(self, state: CovarianceState) -> float:
        forms = jay_quadratic_forms()
        return sum(self.expect_product(state, form, form) for form in forms)

    def expect_arm_J2(self, state: CovarianceState, arm: str) -> float:
        """<(J^arm)^2> from the single-arm Stokes forms."""
        jx, jy, jz, _ = arm_quadratic_forms(arm)
        return sum(self.expect_product(state, form, form) for form in (jx, jy, jz))

    def expect_number(self, state: CovarianceState) -> float:
        return self.expect_quadratic(state, number_quadratic_form())

    def witness(self, state: CovarianceState) -> WitnessReport:
        return criterion(self.expect_J2(state), self.expect_number(state))

    # ---- diagnostics ----

    def uncertainty_floor(self, state: CovarianceState) -> float:
        """
        Smallest eigenvalue of D^-1/2 (Sigma + (i/2) Omega) D^-1/2 with
        D = diag(Sigma). The congruence keeps the sign of every eigenvalue, so
        a negative floor still means the uncertainty relation fails, but the
        value is dimensionless: psd_floor is compared against it, not against
        the raw eigenvalue, whose round-off grows with the largest variance.
        """
        scale = 1.0 / np.sqrt(np.diag(state.sigma))
        matrix = state.sigma + 0.5j * self._omega
        matrix = scale[:, None] * matrix * scale[None, :]
        return float(np.linalg.eigvalsh(matrix)[0])

    def check_uncertainty(self, state: CovarianceState) -> float:
        floor = self.uncertainty_floor(state)
        if floor < self.tolerances.psd_floor:
            raise PhysicalityError(
                f"uncertainty relation violated at t={state.t}: "
                f"eigenvalue floor {floor:.3e}"
            )
        return floor

    def purity_determinant(self, state: CovarianceState) -> float:
        """det(2 Sigma), equal to 1 for pure Gaussian states."""
        sign, logdet = np.linalg.slogdet(2.0 * state.sigma)
        return float(sign * math.exp(logdet))


# Global instance
_gaussian_engine: Optional[GaussianEngineService] = None


def get_gaussian_engine() -> GaussianEngineService:
    """Get the global engine instance"""
    global _gaussian_engine
    if _gaussian_engine is None:
        _gaussian_engine = GaussianEngineService()
    return _gaussian_engine


def reset_gaussian_engine():
    """Reset the global engine instance. Useful for testing."""
    global _gaussian_engine
    _gaussian_engine = None
