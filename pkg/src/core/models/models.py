"""
Domain models for EntLaser

Immutable value types shared by the Gaussian engine, the Fock-space oracle,
the witness calculators and the command-line front end. Array fields are
copied on construction and marked read-only so values can be handed to
parallel workers without defensive copies.
"""

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from ..exceptions import ValidationError

QUADRATURE_DIM = 8
NUM_MODES = 4
QUADRATURE_LABELS: Tuple[str, ...] = ("x1", "p1", "x2", "p2", "x3", "p3", "x4", "p4")
# relative to the largest entry; the stored matrix is symmetrized
SYMMETRY_TOL = 1e-9


def _frozen_array(values: Any, dtype: Any = float) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class SeparableGenerator(enum.Enum):
    """Families of separable states drawn by the witness sampler"""

    PRODUCT_FOCK = "product_fock"
    PRODUCT_COHERENT_SPIN = "product_coherent_spin"
    MIXED_PRODUCT = "mixed_product"


class OracleSuite(enum.Enum):
    """Property suites run by the oracle-check command"""

    ENGINE_VS_ORACLE = "engine_vs_oracle"
    SEPARABILITY = "separability"
    J_BOUND = "j_bound"
    LOSS_LAW = "loss_law"
    ROTATION = "rotation"
    CHANNEL_COMPOSITION = "channel_composition"
    ALGEBRA = "algebra"


class Observable(enum.Enum):
    """Observables a scenario can sample"""

    N = "N"
    J2 = "J2"
    RATIO = "ratio"
    VARIANCES = "variances"


@dataclass(frozen=True)
class QuadraticForm:
    """Observable O = 1/2 q^T G q + c0 over the c-basis quadratures"""

    matrix: np.ndarray
    constant: float = 0.0
    label: str = ""

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.shape != (QUADRATURE_DIM, QUADRATURE_DIM):
            raise ValidationError(
                f"quadratic form must be {QUADRATURE_DIM}x{QUADRATURE_DIM}, "
                f"got {matrix.shape}"
            )
        if not np.allclose(matrix, matrix.T, atol=1e-14):
            raise ValidationError(f"quadratic form '{self.label}' is not symmetric")
        object.__setattr__(self, "matrix", _frozen_array(matrix))
        object.__setattr__(self, "constant", float(self.constant))

    def evaluate(self, q: np.ndarray) -> float:
        """Classical value at the phase-space point q"""
        q = np.asarray(q, dtype=float)
        return float(0.5 * q @ self.matrix @ q + self.constant)


@dataclass(frozen=True)
class DriftSpec:
    """Physical parameters of the driven four-mode system (rates per pass)"""

    kappa0: float
    Lambda: float = 0.0
    lambda_a: float = 0.0
    lambda_b: float = 0.0
    phi: float = 0.0
    f: float = 1.0

    def __post_init__(self):
        for name in ("kappa0", "Lambda", "lambda_a", "lambda_b", "phi", "f"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValidationError(f"DriftSpec.{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.kappa0 <= 0:
            raise ValidationError(f"kappa0 must be positive, got {self.kappa0}")
        if self.Lambda < 0:
            raise ValidationError(f"Lambda must be non-negative, got {self.Lambda}")
        if self.lambda_a < 0 or self.lambda_b < 0:
            raise ValidationError(
                f"loss rates must be non-negative, got "
                f"lambda_a={self.lambda_a}, lambda_b={self.lambda_b}"
            )
        if self.f <= 0:
            raise ValidationError(f"amplitude mismatch f must be positive, got {self.f}")

    @classmethod
    def from_mean_imbalance(
        cls,
        kappa0: float,
        Lambda: float = 0.0,
        lambda_bar: float = 0.0,
        delta_lambda: float = 0.0,
        phi: float = 0.0,
        f: float = 1.0,
    ) -> "DriftSpec":
        """Build from the mean loss rate and the arm imbalance lambda_a - lambda_b"""
        return cls(
            kappa0=kappa0,
            Lambda=Lambda,
            lambda_a=lambda_bar + 0.5 * delta_lambda,
            lambda_b=lambda_bar - 0.5 * delta_lambda,
            phi=phi,
            f=f,
        )

    @property
    def lambda_bar(self) -> float:
        return 0.5 * (self.lambda_a + self.lambda_b)

    @property
    def delta_lambda(self) -> float:
        return self.lambda_a - self.lambda_b

    @property
    def is_balanced(self) -> bool:
        return self.lambda_a == self.lambda_b and self.phi == 0.0 and self.f == 1.0

    def kappa(self, t: float) -> float:
        """Pump-depleted pair-creation rate at time t"""
        return self.kappa0 * math.exp(-self.Lambda * t)


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances and budgets, loaded once from settings"""

    rk4_step: float = 1e-3
    quad_epsabs: float = 1e-10
    quad_epsrel: float = 1e-12
    quad_limit: int = 200
    wick_imag_tol: float = 1e-10
    psd_floor: float = -1e-9
    max_dimension: int = 1_000_000
    max_density_elements: int = 25_000_000
    krylov_tol: float = 1e-10
    krylov_max_subspace: int = 40
    truncation_warn: float = 1e-9
    imag_tol: float = 1e-10
    hermiticity_tol: float = 1e-12
    trace_tol: float = 1e-9
    pure_cutoff: int = 12
    density_cutoff: int = 6
    separable_tol: float = 1e-9
    bound_tol: float = 1e-10
    max_mixture_components: int = 8
    max_sweep_points: int = 10_000
    workers: int = 1


@dataclass(frozen=True)
class CovarianceState:
    """Zero-mean Gaussian state: symmetrized quadrature second moments at time t"""

    sigma: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.shape != (QUADRATURE_DIM, QUADRATURE_DIM):
            raise ValidationError(
                f"covariance must be {QUADRATURE_DIM}x{QUADRATURE_DIM}, got {sigma.shape}"
            )
        if not np.all(np.isfinite(sigma)):
            raise ValidationError("covariance contains non-finite entries")
        scale = max(1.0, float(np.max(np.abs(sigma))))
        if np.max(np.abs(sigma - sigma.T)) > SYMMETRY_TOL * scale:
            raise ValidationError("covariance is not symmetric")
        object.__setattr__(self, "sigma", _frozen_array(0.5 * (sigma + sigma.T)))
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def vacuum(cls, t: float = 0.0) -> "CovarianceState":
        return cls(0.5 * np.eye(QUADRATURE_DIM), t)

    def variances(self) -> Dict[str, float]:
        """Diagonal second moments keyed by quadrature label"""
        return {
            label: float(value)
            for label, value in zip(QUADRATURE_LABELS, np.diag(self.sigma))
        }

    def with_sigma(self, sigma: np.ndarray) -> "CovarianceState":
        return CovarianceState(sigma, self.t)


@dataclass(frozen=True)
class WitnessReport:
    """Witness evaluation: entangled iff <J^2>/<N> < 1/2"""

    j2: float
    n: float
    ratio: float
    entangled: bool
    margin: float
    vacuous: bool = False


@dataclass(frozen=True)
class FockState:
    """Pure state on the truncated four-mode space, index order (a_h, a_v, b_h, b_v)"""

    amplitudes: np.ndarray
    cutoff: int
    truncation_deficit: float = 0.0

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        expected = (self.cutoff + 1) ** NUM_MODES
        if amplitudes.size != expected:
            raise ValidationError(
                f"state has {amplitudes.size} amplitudes, cutoff {self.cutoff} "
                f"needs {expected}"
            )
        object.__setattr__(self, "amplitudes", _frozen_array(amplitudes, complex))
        object.__setattr__(self, "cutoff", int(self.cutoff))
        object.__setattr__(self, "truncation_deficit", float(self.truncation_deficit))

    @property
    def dimension(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per mode"""
        return self.amplitudes.reshape((self.cutoff + 1,) * NUM_MODES)


@dataclass(frozen=True)
class FockDensity:
    """Density matrix on the truncated four-mode space"""

    matrix: np.ndarray
    cutoff: int
    truncation_deficit: float = 0.0

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        expected = (self.cutoff + 1) ** NUM_MODES
        if matrix.shape != (expected, expected):
            raise ValidationError(
                f"density has shape {matrix.shape}, cutoff {self.cutoff} "
                f"needs ({expected}, {expected})"
            )
        object.__setattr__(self, "matrix", _frozen_array(matrix, complex))
        object.__setattr__(self, "cutoff", int(self.cutoff))
        object.__setattr__(self, "truncation_deficit", float(self.truncation_deficit))

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def tensor(self) -> np.ndarray:
        """Matrix reshaped to (ket modes..., bra modes...)"""
        return self.matrix.reshape((self.cutoff + 1,) * (2 * NUM_MODES))


@dataclass(frozen=True)
class ThresholdReport:
    """Order-of-magnitude imperfection bounds at a given mean photon number"""

    n_mean: float
    kappa: float
    delta_eta_max: float
    delta_lambda_over_kappa_max: float
    phi_max_sqrt: float
    phi_max_linear: float
    eta_critical: float = 1.0 / 3.0
    caveat: str = "order-of-magnitude conditions; bounds shown as equalities"

    @property
    def delta_lambda_max(self) -> float:
        return self.delta_lambda_over_kappa_max * self.kappa

    def rows(self) -> List[Tuple[str, float]]:
        return [
            ("n_mean", self.n_mean),
            ("kappa", self.kappa),
            ("delta_eta_max", self.delta_eta_max),
            ("delta_lambda_over_kappa_max", self.delta_lambda_over_kappa_max),
            ("delta_lambda_max", self.delta_lambda_max),
            ("phi_max_sqrt", self.phi_max_sqrt),
            ("phi_max_linear", self.phi_max_linear),
            ("eta_critical", self.eta_critical),
        ]


@dataclass(frozen=True)
class SeparableSample:
    """Ratio of one sampled separable state"""

    generator: SeparableGenerator
    seed: int
    index: int
    ratio: float
    j2: float
    n: float

    @property
    def description(self) -> str:
        return f"{self.generator.value}:seed={self.seed}:index={self.index}"


@dataclass(frozen=True)
class PropertyResult:
    """Outcome of one oracle-check property"""

    suite: str
    name: str
    deviation: float
    tolerance: float
    passed: bool
    seed: Optional[int] = None
    details: Mapping[str, Any] = field(default_factory=dict)

    def to_json_line(self) -> str:
        payload = {
            "suite": self.suite,
            "property": self.name,
            "deviation": self.deviation,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "seed": self.seed,
            **dict(self.details),
        }
        return json.dumps(payload, sort_keys=False, allow_nan=True)


@dataclass(frozen=True)
class TimeSeries:
    """Sampled observables of one run, column order as declared"""

    times: np.ndarray
    columns: Mapping[str, np.ndarray]
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        times = _frozen_array(self.times)
        columns: Dict[str, np.ndarray] = {}
        for name, values in self.columns.items():
            column = _frozen_array(values)
            if column.shape != times.shape:
                raise ValidationError(
                    f"column '{name}' has {column.size} rows, expected {times.size}"
                )
            columns[name] = column
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "metadata", dict(self.metadata))

    def __len__(self) -> int:
        return int(self.times.size)

    def final_row(self) -> Dict[str, float]:
        row = {"t": float(self.times[-1])}
        row.update({name: float(values[-1]) for name, values in self.columns.items()})
        return row


@dataclass(frozen=True)
class SweepTable:
    """One row per sweep point, in grid order"""

    header: Tuple[str, ...]
    rows: Tuple[Tuple[Any, ...], ...]
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> List[Any]:
        if name not in self.header:
            raise ValidationError(f"sweep table has no column '{name}'")
        index = self.header.index(name)
        return [row[index] for row in self.rows]
