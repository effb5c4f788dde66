"""Model parameters, product basis, operator matrices and coherent states.

Basis ordering puts the field index fastest: ``flat = (J + m) * dim_field + n``,
so a state vector reshaped to ``(dim_spin, dim_field)`` has spin along the
rows and photon number along the columns.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.special import gammaln
from scipy.stats import poisson

# labels closer than this (relative) to the spin-disk border are rejected
BORDER_REL_TOL = 1e-12
# field coherent states with more probability than this beyond n_max are rejected
TAIL_TOL = 1e-10


class TruncationError(ValueError):
    """Raised when the Fock cutoff is too small for a requested state."""


class BorderError(ValueError):
    """Raised for spin labels on or outside the circle q_a^2 + p_a^2 = 4J."""


def _check_spin(J: float) -> float:
    twoJ = 2 * float(J)
    if J <= 0 or abs(twoJ - round(twoJ)) > 1e-12:
        raise ValueError(f"J must be a positive half-integer, got {J!r}")
    return round(twoJ) / 2


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the model (hbar = 1).

    Defaults are the nonintegrable resonant set: J = 9/2, G = 0.5, G' = 0.2,
    epsilon = omega0 = 1.
    """

    J: float = 4.5
    omega0: float = 1.0
    epsilon: float = 1.0
    G: float = 0.5
    Gprime: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "J", _check_spin(self.J))
        if not (self.omega0 > 0 and self.epsilon > 0):
            raise ValueError("omega0 and epsilon must be positive")
        if self.G < 0 or self.Gprime < 0:
            raise ValueError("couplings G and Gprime must be non-negative")

    @property
    def Gplus(self) -> float:
        return self.G + self.Gprime

    @property
    def Gminus(self) -> float:
        return self.G - self.Gprime

    @property
    def n_atoms(self) -> int:
        return int(round(2 * self.J))


@dataclass(frozen=True)
class PhasePoint:
    """Classical coordinates labelling both coherent states and classical states."""

    q_a: float
    p_a: float
    q_f: float
    p_f: float

    def as_array(self) -> np.ndarray:
        return np.array([self.q_a, self.p_a, self.q_f, self.p_f], dtype=float)

    @classmethod
    def from_array(cls, x) -> "PhasePoint":
        q_a, p_a, q_f, p_f = (float(v) for v in x)
        return cls(q_a, p_a, q_f, p_f)

    @property
    def spin_radius2(self) -> float:
        return self.q_a**2 + self.p_a**2


@dataclass(frozen=True)
class BasisDescriptor:
    J: float
    n_max: int
    dim_spin: int = field(init=False)
    dim_field: int = field(init=False)
    dim_total: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "J", _check_spin(self.J))
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ValueError(f"n_max must be a non-negative integer, got {self.n_max!r}")
        object.__setattr__(self, "n_max", int(self.n_max))
        object.__setattr__(self, "dim_spin", int(round(2 * self.J)) + 1)
        object.__setattr__(self, "dim_field", self.n_max + 1)
        object.__setattr__(self, "dim_total", self.dim_spin * self.dim_field)

    @property
    def m_values(self) -> np.ndarray:
        return np.arange(self.dim_spin) - self.J

    def index(self, m: float, n: int) -> int:
        k = int(round(self.J + m))
        if not (0 <= k < self.dim_spin and abs(self.J + m - k) < 1e-12):
            raise IndexError(f"m={m} outside spin J={self.J}")
        if not 0 <= n <= self.n_max:
            raise IndexError(f"n={n} outside 0..{self.n_max}")
        return k * self.dim_field + n

    def labels(self, flat: int) -> tuple[float, int]:
        if not 0 <= flat < self.dim_total:
            raise IndexError(flat)
        k, n = divmod(flat, self.dim_field)
        return k - self.J, n

    def reshape(self, psi: np.ndarray) -> np.ndarray:
        """View a product-basis vector as a (dim_spin, dim_field) amplitude matrix."""
        return np.asarray(psi).reshape(self.dim_spin, self.dim_field)


@dataclass(frozen=True)
class OperatorSet:
    """Ladder and spin matrices on the flat product basis."""

    basis: BasisDescriptor
    a: np.ndarray
    a_dag: np.ndarray
    Jp: np.ndarray
    Jm: np.ndarray
    Jz: np.ndarray

    @property
    def number(self) -> np.ndarray:
        return _product(self.a_dag, self.a)

    def total_excitation(self) -> np.ndarray:
        """P = Jz + a^dag a, conserved when G' = 0."""
        return self.Jz + self.number

    def relative_excitation(self) -> np.ndarray:
        """P' = Jz - a^dag a, conserved when G = 0."""
        return self.Jz - self.number


def _product(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # all operators are banded; dense matmul at dim ~2500 is needlessly slow
    return (sparse.csr_matrix(x) @ sparse.csr_matrix(y)).toarray()


def build_basis(params: ModelParams | float, n_max: int) -> BasisDescriptor:
    J = params.J if isinstance(params, ModelParams) else params
    return BasisDescriptor(J, n_max)


def spin_matrices(J: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(J+, J-, Jz) on the spin space ordered m = -J, ..., J."""
    J = _check_spin(J)
    m = np.arange(int(round(2 * J)) + 1) - J
    up = np.sqrt(J * (J + 1) - m[:-1] * (m[:-1] + 1))
    Jp = np.diag(up, -1).astype(complex)
    return Jp, Jp.T.copy(), np.diag(m).astype(complex)


def field_annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), 1).astype(complex)


def build_operators(basis: BasisDescriptor) -> OperatorSet:
    Jp_s, Jm_s, Jz_s = spin_matrices(basis.J)
    a_f = field_annihilation(basis.n_max)
    id_s = np.eye(basis.dim_spin)
    id_f = np.eye(basis.dim_field)
    a = np.kron(id_s, a_f)
    return OperatorSet(
        basis=basis,
        a=a,
        a_dag=a.conj().T.copy(),
        Jp=np.kron(Jp_s, id_f),
        Jm=np.kron(Jm_s, id_f),
        Jz=np.kron(Jz_s, id_f),
    )


def build_hamiltonian(params: ModelParams, ops: OperatorSet) -> np.ndarray:
    """Dense Hamiltonian with rotating (G) and counter-rotating (G') couplings."""
    if abs(ops.basis.J - params.J) > 1e-12:
        raise ValueError(f"operators built for J={ops.basis.J}, params have J={params.J}")
    scale = 1.0 / np.sqrt(2 * params.J)
    a, ad, Jp, Jm = ops.a, ops.a_dag, ops.Jp, ops.Jm
    H = params.omega0 * ops.number + params.epsilon * ops.Jz
    H = H + params.G * scale * (_product(a, Jp) + _product(ad, Jm))
    H = H + params.Gprime * scale * (_product(ad, Jp) + _product(a, Jm))
    # kill the O(eps) asymmetry left by the matrix products
    return 0.5 * (H + H.conj().T)


def spin_label(q_a: float, p_a: float, J: float) -> complex:
    """Complex label w of the spin coherent state at (q_a, p_a)."""
    r2 = q_a**2 + p_a**2
    if r2 > 4 * J * (1 - BORDER_REL_TOL):
        raise BorderError(f"q_a^2 + p_a^2 = {r2:.15g} not inside 4J = {4 * J:g}")
    return complex(p_a, q_a) / np.sqrt(4 * J - r2)


def field_label(q_f: float, p_f: float) -> complex:
    return complex(p_f, q_f) / np.sqrt(2.0)


def spin_coherent_state(q_a: float, p_a: float, J: float) -> np.ndarray:
    """Normalized SU(2) coherent state on the spin block, ordered m = -J..J.

    Amplitudes are C(2J, J+m)^(1/2) w^(J+m) (1+|w|^2)^(-J), evaluated in log
    space so large J does not overflow.
    """
    J = _check_spin(J)
    w = spin_label(q_a, p_a, J)
    twoJ = int(round(2 * J))
    k = np.arange(twoJ + 1)
    log_binom = gammaln(twoJ + 1) - gammaln(k + 1) - gammaln(twoJ - k + 1)
    absw = abs(w)
    if absw == 0.0:
        psi = np.zeros(twoJ + 1, dtype=complex)
        psi[0] = 1.0
        return psi
    log_mod = 0.5 * log_binom + k * np.log(absw) - J * np.log1p(absw**2)
    psi = np.exp(log_mod) * np.exp(1j * k * np.angle(w))
    return psi / np.linalg.norm(psi)


def field_coherent_amplitudes(q_f: float, p_f: float, n_max: int) -> tuple[np.ndarray, float]:
    """Untruncated-normalization amplitudes up to n_max and the probability beyond."""
    v = field_label(q_f, p_f)
    n = np.arange(n_max + 1)
    nbar = abs(v) ** 2
    if nbar == 0.0:
        c = np.zeros(n_max + 1, dtype=complex)
        c[0] = 1.0
        return c, 0.0
    log_mod = -0.5 * nbar + n * np.log(abs(v)) - 0.5 * gammaln(n + 1)
    c = np.exp(log_mod) * np.exp(1j * n * np.angle(v))
    return c, float(poisson.sf(n_max, nbar))


def field_coherent_state(q_f: float, p_f: float, n_max: int) -> np.ndarray:
    """Normalized Glauber coherent state truncated to photon numbers 0..n_max."""
    c, tail = field_coherent_amplitudes(q_f, p_f, n_max)
    if tail > TAIL_TOL:
        raise TruncationError(
            f"coherent state with mean photon number {abs(field_label(q_f, p_f))**2:.4g} "
            f"leaves {tail:.3e} probability above n_max={n_max}"
        )
    return c / np.linalg.norm(c)


def product_initial_state(point: PhasePoint, basis: BasisDescriptor) -> np.ndarray:
    """|w> (x) |v> on the flat product basis."""
    spin = spin_coherent_state(point.q_a, point.p_a, basis.J)
    fld = field_coherent_state(point.q_f, point.p_f, basis.n_max)
    return np.kron(spin, fld)
