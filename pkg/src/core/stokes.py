"""
Mode conventions and polarization-spin observables

Two mode bases are used throughout. The arm/polarization basis orders modes
as (a_h, a_v, b_h, b_v); the squeezer basis (c1, c2, c3, c4) is reached by
c = U a with

    c1 = (a_h + b_v)/sqrt2    c2 = (a_h - b_v)/sqrt2
    c3 = (a_v + b_h)/sqrt2    c4 = (a_v - b_h)/sqrt2

Quadratures are x = (c + c^dag)/sqrt2, p = -i(c - c^dag)/sqrt2, ordered
q = (x1, p1, x2, p2, x3, p3, x4, p4). Every number-conserving bilinear
observable sum h_mn m^dag_m m_n is carried both as a quadratic form
O = 1/2 q^T G q + c0 and, on a truncated Fock space, as a sparse matrix.

Stokes components use the right-handed convention
J_y = (a_h^dag a_v - a_v^dag a_h)/(2i) so that [J_x, J_y] = i J_z.
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .exceptions import BudgetExceededError, ValidationError
from .models import NUM_MODES, QUADRATURE_DIM, QuadraticForm, Tolerances

_SQRT_HALF = 1.0 / np.sqrt(2.0)

AH, AV, BH, BV = range(NUM_MODES)
ARM_MODES = {"A": (AH, AV), "B": (BH, BV)}
_AXES = ("x", "y", "z")


def c_basis_transform(ordering: str = "ab") -> np.ndarray:
    """
    Real orthogonal map from arm/polarization modes to squeezer modes.

    With ordering="ab" columns follow (a_h, a_v, b_h, b_v) and rows
    (c1, c2, c3, c4), so U^T is the inverse. With ordering="paired" the
    columns follow (a_h, b_v, a_v, b_h); in that ordering U is a block
    Hadamard matrix and is its own inverse.
    """
    if ordering == "ab":
        matrix = [[1, 0, 0, 1], [1, 0, 0, -1], [0, 1, 1, 0], [0, 1, -1, 0]]
    elif ordering == "paired":
        matrix = [[1, 1, 0, 0], [1, -1, 0, 0], [0, 0, 1, 1], [0, 0, 1, -1]]
    else:
        raise ValidationError(f"unknown mode ordering '{ordering}'")
    result = _SQRT_HALF * np.array(matrix, dtype=float)
    result.setflags(write=False)
    return result


@lru_cache(maxsize=None)
def symplectic_form() -> np.ndarray:
    """Omega with [q_i, q_j] = i Omega_ij for the interleaved ordering."""
    omega = np.kron(np.eye(NUM_MODES), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    omega.setflags(write=False)
    return omega


@lru_cache(maxsize=None)
def quadrature_transform() -> np.ndarray:
    """T with q_c = T q_ab."""
    transform = np.kron(c_basis_transform(), np.eye(2))
    transform.setflags(write=False)
    return transform


def mode_matrix_to_form(
    h: np.ndarray, basis: str = "ab", label: str = ""
) -> QuadraticForm:
    """
    Quadrature representation of O = sum_mn h_mn m^dag_m m_n.

    h must be Hermitian 4x4. The result acts on the c-basis quadratures.
    """
    h = np.asarray(h, dtype=complex)
    if h.shape != (NUM_MODES, NUM_MODES):
        raise ValidationError(f"mode matrix must be 4x4, got {h.shape}")
    if not np.allclose(h, h.conj().T, atol=1e-14):
        raise ValidationError("mode matrix is not Hermitian")
    if basis == "ab":
        u = c_basis_transform()
        h = u @ h @ u.T
    elif basis != "c":
        raise ValidationError(f"unknown basis '{basis}'")

    hr, hi = h.real, h.imag
    g = np.zeros((QUADRATURE_DIM, QUADRATURE_DIM))
    g[0::2, 0::2] = hr
    g[1::2, 1::2] = hr
    g[0::2, 1::2] = -hi
    g[1::2, 0::2] = hi
    return QuadraticForm(g, constant=-0.5 * float(np.trace(hr)), label=label)


def _stokes_mode_matrices(modes: Sequence[int]) -> Tuple[np.ndarray, ...]:
    """(h_x, h_y, h_z) summed over the given (horizontal, vertical) pairs."""
    hx = np.zeros((NUM_MODES, NUM_MODES), dtype=complex)
    hy = np.zeros((NUM_MODES, NUM_MODES), dtype=complex)
    hz = np.zeros((NUM_MODES, NUM_MODES), dtype=complex)
    for horizontal, vertical in modes:
        hx[horizontal, vertical] = hx[vertical, horizontal] = 0.5
        hy[horizontal, vertical] = -0.5j
        hy[vertical, horizontal] = 0.5j
        hz[horizontal, horizontal] = 0.5
        hz[vertical, vertical] = -0.5
    return hx, hy, hz


@lru_cache(maxsize=None)
def jay_quadratic_forms() -> Tuple[QuadraticForm, QuadraticForm, QuadraticForm]:
    """Total Stokes components as quadratic forms, returned as (J_z, J_x, J_y)."""
    hx, hy, hz = _stokes_mode_matrices([ARM_MODES["A"], ARM_MODES["B"]])
    return (
        mode_matrix_to_form(hz, label="J_z"),
        mode_matrix_to_form(hx, label="J_x"),
        mode_matrix_to_form(hy, label="J_y"),
    )


@lru_cache(maxsize=None)
def number_quadratic_form() -> QuadraticForm:
    """Total photon number: G = identity, c0 = -2."""
    return mode_matrix_to_form(np.eye(NUM_MODES), label="N")


@lru_cache(maxsize=None)
def arm_quadratic_forms(
    arm: str,
) -> Tuple[QuadraticForm, QuadraticForm, QuadraticForm, QuadraticForm]:
    """(J_x, J_y, J_z, N) restricted to one arm ("A" or "B")."""
    if arm not in ARM_MODES:
        raise ValidationError(f"arm must be 'A' or 'B', got {arm!r}")
    hx, hy, hz = _stokes_mode_matrices([ARM_MODES[arm]])
    hn = np.zeros((NUM_MODES, NUM_MODES))
    for mode in ARM_MODES[arm]:
        hn[mode, mode] = 1.0
    return (
        mode_matrix_to_form(hx, label=f"J{arm}_x"),
        mode_matrix_to_form(hy, label=f"J{arm}_y"),
        mode_matrix_to_form(hz, label=f"J{arm}_z"),
        mode_matrix_to_form(hn, label=f"N_{arm}"),
    )


def fock_dimension(cutoff: int, modes: int = NUM_MODES) -> int:
    return (int(cutoff) + 1) ** modes


def fock_basis_index(occupation: Sequence[int], cutoff: int) -> int:
    """Mixed-radix position of (n_ah, n_av, n_bh, n_bv), first mode slowest."""
    radix = cutoff + 1
    index = 0
    for n in occupation:
        if not 0 <= n <= cutoff:
            raise ValidationError(f"occupation {n} outside [0, {cutoff}]")
        index = index * radix + int(n)
    return index


def fock_occupations(cutoff: int, modes: int = NUM_MODES) -> np.ndarray:
    """Occupation numbers of every basis state, shape (dimension, modes)."""
    grids = np.indices((cutoff + 1,) * modes).reshape(modes, -1)
    occupations = grids.T.copy()
    occupations.setflags(write=False)
    return occupations


def _embed(single: sparse.spmatrix, position: int, modes: int, radix: int):
    eye = sparse.identity(radix, format="csr")
    result = sparse.identity(1, format="csr")
    for mode in range(modes):
        result = sparse.kron(result, single if mode == position else eye, "csr")
    return result.tocsr()


def _ladder(radix: int) -> sparse.csr_matrix:
    """Truncated annihilator, <n-1|a|n> = sqrt(n)."""
    return sparse.diags(np.sqrt(np.arange(1, radix)), 1, format="csr")


@dataclass(frozen=True)
class FockOperatorSet:
    """
    Sparse observables on the four-mode space with per-mode cutoff.

    Matrices are assembled lazily on first access. Stokes components conserve
    each arm's photon number, so they are exact on states with N_A <= cutoff
    and N_B <= cutoff; elsewhere truncation-then-multiply leaves boundary
    artifacts.
    """

    cutoff: int

    @property
    def radix(self) -> int:
        return self.cutoff + 1

    @cached_property
    def dimension(self) -> int:
        return fock_dimension(self.cutoff)

    @cached_property
    def occupations(self) -> np.ndarray:
        return fock_occupations(self.cutoff)

    @cached_property
    def annihilators(self) -> Tuple[sparse.csr_matrix, ...]:
        ladder = _ladder(self.radix)
        return tuple(
            _embed(ladder, mode, NUM_MODES, self.radix) for mode in range(NUM_MODES)
        )

    def _diagonal(self, values: np.ndarray) -> sparse.csr_matrix:
        return sparse.diags(values.astype(float), 0, format="csr")

    @cached_property
    def mode_numbers(self) -> Tuple[sparse.csr_matrix, ...]:
        return tuple(
            self._diagonal(self.occupations[:, mode]) for mode in range(NUM_MODES)
        )

    @cached_property
    def N_A(self) -> sparse.csr_matrix:
        return self._diagonal(self.occupations[:, AH] + self.occupations[:, AV])

    @cached_property
    def N_B(self) -> sparse.csr_matrix:
        return self._diagonal(self.occupations[:, BH] + self.occupations[:, BV])

    @cached_property
    def N(self) -> sparse.csr_matrix:
        return self._diagonal(self.occupations.sum(axis=1))

    def _arm_stokes(self, arm: str) -> Tuple[sparse.csr_matrix, ...]:
        horizontal, vertical = (self.annihilators[m] for m in ARM_MODES[arm])
        hv = (horizontal.conj().T @ vertical).tocsr()
        vh = hv.conj().T.tocsr()
        jx = 0.5 * (hv + vh)
        jy = -0.5j * (hv - vh)
        jz = 0.5 * (
            self.mode_numbers[ARM_MODES[arm][0]] - self.mode_numbers[ARM_MODES[arm][1]]
        )
        return jx.tocsr(), jy.tocsr(), jz.tocsr()

    @cached_property
    def jay_a(self) -> Tuple[sparse.csr_matrix, ...]:
        """(J^A_x, J^A_y, J^A_z)"""
        return self._arm_stokes("A")

    @cached_property
    def jay_b(self) -> Tuple[sparse.csr_matrix, ...]:
        """(J^B_x, J^B_y, J^B_z)"""
        return self._arm_stokes("B")

    @cached_property
    def jay(self) -> Tuple[sparse.csr_matrix, ...]:
        """Total (J_x, J_y, J_z)"""
        return tuple((a + b).tocsr() for a, b in zip(self.jay_a, self.jay_b))

    @cached_property
    def J2(self) -> sparse.csr_matrix:
        return sum((j @ j for j in self.jay), sparse.csr_matrix(self.N.shape)).tocsr()

    @cached_property
    def JA2(self) -> sparse.csr_matrix:
        return sum(
            (j @ j for j in self.jay_a), sparse.csr_matrix(self.N.shape)
        ).tocsr()

    @cached_property
    def JB2(self) -> sparse.csr_matrix:
        return sum(
            (j @ j for j in self.jay_b), sparse.csr_matrix(self.N.shape)
        ).tocsr()

    @cached_property
    def c_mode_numbers(self) -> Tuple[sparse.csr_matrix, ...]:
        """c^dag_m c_m assembled from a/b ladder operators."""
        u = c_basis_transform()
        creators = [a.conj().T.tocsr() for a in self.annihilators]
        numbers = []
        for m in range(NUM_MODES):
            total = sparse.csr_matrix(self.N.shape)
            for k in range(NUM_MODES):
                for l in range(NUM_MODES):
                    weight = u[m, k] * u[m, l]
                    if weight != 0.0:
                        total = total + weight * (creators[k] @ self.annihilators[l])
            numbers.append(total.tocsr())
        return tuple(numbers)

    def operator(self, name: str) -> sparse.csr_matrix:
        """Look up an observable by name, e.g. "J_x", "JA_z", "J2", "N_A"."""
        if name in ("J2", "JA2", "JB2", "N", "N_A", "N_B"):
            return getattr(self, name)
        prefix, _, axis = name.partition("_")
        components = {"J": "jay", "JA": "jay_a", "JB": "jay_b"}
        if prefix in components and axis in _AXES:
            return getattr(self, components[prefix])[_AXES.index(axis)]
        raise ValidationError(f"unknown Fock operator '{name}'")


@lru_cache(maxsize=8)
def _operator_set(cutoff: int) -> FockOperatorSet:
    return FockOperatorSet(cutoff)


def check_fock_budget(cutoff: int, max_dimension: Optional[int] = None) -> int:
    """Validate a cutoff against the dimension budget and return the dimension."""
    if int(cutoff) != cutoff or cutoff < 1:
        raise ValidationError(f"cutoff must be a positive integer, got {cutoff}")
    budget = Tolerances().max_dimension if max_dimension is None else max_dimension
    dimension = fock_dimension(cutoff)
    if dimension > budget:
        raise BudgetExceededError(
            f"cutoff {cutoff} needs a {dimension}-dimensional space, "
            f"budget is {budget}",
            requested=dimension,
            budget=budget,
        )
    return dimension


def build_fock_operators(
    cutoff: int, max_dimension: Optional[int] = None
) -> FockOperatorSet:
    """Observables on the truncated space, shared per cutoff."""
    check_fock_budget(cutoff, max_dimension)
    return _operator_set(int(cutoff))


@dataclass(frozen=True)
class ArmOperatorSet:
    """
    Dense single-arm observables on the (n_h, n_v) space.

    Used for separable-state sampling where every state is a product of
    arm states, so two-mode matrices replace four-mode ones.
    """

    cutoff: int

    @cached_property
    def occupations(self) -> np.ndarray:
        return fock_occupations(self.cutoff, modes=2)

    @cached_property
    def support(self) -> np.ndarray:
        """Mask of basis states with n_h + n_v <= cutoff."""
        return self.occupations.sum(axis=1) <= self.cutoff

    @cached_property
    def matrices(self) -> Dict[str, np.ndarray]:
        radix = self.cutoff + 1
        ladder = _ladder(radix)
        horizontal = _embed(ladder, 0, 2, radix)
        vertical = _embed(ladder, 1, 2, radix)
        hv = (horizontal.conj().T @ vertical).toarray()
        vh = hv.conj().T
        n_h = np.diag(self.occupations[:, 0].astype(float))
        n_v = np.diag(self.occupations[:, 1].astype(float))
        jx = 0.5 * (hv + vh)
        jy = -0.5j * (hv - vh)
        jz = 0.5 * (n_h - n_v).astype(complex)
        return {
            "J_x": jx,
            "J_y": jy,
            "J_z": jz,
            "J2": jx @ jx + jy @ jy + jz @ jz,
            "N": (n_h + n_v).astype(complex),
        }


@lru_cache(maxsize=8)
def build_arm_operators(cutoff: int) -> ArmOperatorSet:
    if int(cutoff) != cutoff or cutoff < 1:
        raise ValidationError(f"cutoff must be a positive integer, got {cutoff}")
    return ArmOperatorSet(int(cutoff))
