"""Exact propagation by spectral decomposition and subsystem observables."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import gammaln

from .model import (
    BasisDescriptor,
    ModelParams,
    PhasePoint,
    TruncationError,
    build_basis,
    build_hamiltonian,
    build_operators,
    product_initial_state,
)


class EigensolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns are eigenstates

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class TimeSeries:
    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("time grid and values must be 1-D arrays of equal length")
        if len(t) > 1:
            steps = np.diff(t)
            if np.any(steps <= 0):
                raise ValueError("time grid must be strictly increasing")
            if np.max(np.abs(steps - steps[0])) > 1e-12 * max(1.0, abs(t[-1])):
                raise ValueError("time grid must be uniform")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def __len__(self):
        return len(self.t)

    def window(self, t0: float, t1: float) -> "TimeSeries":
        sel = (self.t >= t0 - 1e-12) & (self.t <= t1 + 1e-12)
        return TimeSeries(self.t[sel], self.values[sel])


@dataclass(frozen=True)
class Observables:
    """delta(t), its rate and <Jz>(t)/J on a shared grid."""

    delta: TimeSeries
    rate: TimeSeries
    jz_over_J: TimeSeries

    @property
    def t(self) -> np.ndarray:
        return self.delta.t


@dataclass(frozen=True)
class HusimiGrid:
    q: np.ndarray  # q_a axis
    p: np.ndarray  # p_a axis
    values: np.ndarray  # indexed [i_p, i_q]
    mask: np.ndarray
    weights: np.ndarray  # phase-space measure of each cell, zero off the disk
    J: float

    @property
    def normalization(self) -> float:
        """Integral of Q over the disk; equals Tr rho = 1 for an exact measure."""
        return float(np.sum(self.weights * self.values))


def diagonalize(H: np.ndarray, check: bool = True) -> SpectralDecomposition:
    """Full dense Hermitian eigendecomposition (LAPACK divide and conquer)."""
    H = np.asarray(H)
    try:
        lam, V = linalg.eigh(H, driver="evd", check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        herm = float(np.max(np.abs(H - H.conj().T))) if H.ndim == 2 and H.shape[0] == H.shape[1] else float("nan")
        raise EigensolverError(
            f"eigh failed for shape {H.shape}: {exc}; max|H - H^dag| = {herm:.3e}, "
            f"finite = {bool(np.all(np.isfinite(H)))}"
        ) from exc
    if check:
        scale = max(1.0, float(np.max(np.abs(lam))))
        resid = float(np.max(np.abs(H @ V - V * lam)))
        if resid > 1e-9 * scale:
            raise EigensolverError(f"eigen-residual {resid:.3e} exceeds 1e-9 * |H|")
    return SpectralDecomposition(lam, V)


def _coefficients(spec: SpectralDecomposition, psi0: np.ndarray):
    return spec.eigenvalues, spec.eigenvectors, spec.eigenvectors.conj().T @ psi0


def evolve(spec: SpectralDecomposition, psi0: np.ndarray, t):
    """psi(t) = V exp(-i lambda t) V^dag psi0.

    Scalar ``t`` gives a vector; an array of times gives shape (len(t), dim).
    """
    lam, V, c = _coefficients(spec, np.asarray(psi0, dtype=complex))
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = (V @ (c[:, None] * np.exp(-1j * np.outer(lam, ts)))).T
    return out[0] if np.ndim(t) == 0 else out


def iter_states(spec: SpectralDecomposition, psi0: np.ndarray, times: np.ndarray, chunk: int = 256):
    """Yield (slice, states) blocks of psi(t) over ``times``."""
    lam, V, c = _coefficients(spec, np.asarray(psi0, dtype=complex))
    for start in range(0, len(times), chunk):
        ts = times[start:start + chunk]
        yield slice(start, start + len(ts)), (V @ (c[:, None] * np.exp(-1j * np.outer(lam, ts)))).T


def reduced_density_atom(psi: np.ndarray, basis: BasisDescriptor) -> np.ndarray:
    """Partial trace over the field; works on one state or a stack of states."""
    psi = np.asarray(psi)
    M = psi.reshape(psi.shape[:-1] + (basis.dim_spin, basis.dim_field))
    return M @ np.swapaxes(M.conj(), -1, -2)


def reduced_density_field(psi: np.ndarray, basis: BasisDescriptor) -> np.ndarray:
    psi = np.asarray(psi)
    M = psi.reshape(psi.shape[:-1] + (basis.dim_spin, basis.dim_field))
    return np.swapaxes(M, -1, -2) @ M.conj()


def linear_entropy(rho: np.ndarray):
    """1 - Tr(rho^2); for Hermitian rho this is 1 - sum |rho_ij|^2."""
    rho = np.asarray(rho)
    return 1.0 - np.sum(np.abs(rho) ** 2, axis=(-2, -1))


def expect_jz(rho_a: np.ndarray, J: float):
    rho_a = np.asarray(rho_a)
    m = np.arange(rho_a.shape[-1]) - J
    return np.real(np.diagonal(rho_a, axis1=-2, axis2=-1)) @ m


def entropy_rate(delta: TimeSeries, max_dt: float = 0.02) -> TimeSeries:
    """Central differences inside, one-sided at the two ends."""
    if len(delta) < 3:
        raise ValueError("need at least 3 samples to differentiate")
    if delta.dt > max_dt + 1e-15:
        raise ValueError(f"grid spacing {delta.dt} exceeds {max_dt}")
    return TimeSeries(delta.t, np.gradient(delta.values, delta.dt, edge_order=1))


def time_grid(t_max: float, dt: float) -> np.ndarray:
    if dt <= 0 or t_max <= dt:
        raise ValueError(f"need 0 < dt < t_max (dt={dt}, t_max={t_max})")
    n = int(round(t_max / dt))
    return np.arange(n + 1) * dt


def observable_run(
    spec: SpectralDecomposition,
    psi0: np.ndarray,
    t_max: float,
    dt: float,
    basis: BasisDescriptor,
) -> Observables:
    times = time_grid(t_max, dt)
    delta = np.empty(len(times))
    jz = np.empty(len(times))
    for sl, states in iter_states(spec, psi0, times):
        rho = reduced_density_atom(states, basis)
        delta[sl] = linear_entropy(rho)
        jz[sl] = expect_jz(rho, basis.J)
    delta_ts = TimeSeries(times, delta)
    return Observables(
        delta=delta_ts,
        rate=entropy_rate(delta_ts, max_dt=max(0.02, dt)),
        jz_over_J=TimeSeries(times, jz / basis.J),
    )


@dataclass(frozen=True)
class QuantumSystem:
    """Everything needed to propagate product states for one (params, n_max)."""

    params: ModelParams
    basis: BasisDescriptor
    hamiltonian: np.ndarray
    spectrum: SpectralDecomposition

    @classmethod
    def build(cls, params: ModelParams, n_max: int) -> "QuantumSystem":
        basis = build_basis(params, n_max)
        H = build_hamiltonian(params, build_operators(basis))
        return cls(params, basis, H, diagonalize(H))

    def initial_state(self, point: PhasePoint) -> np.ndarray:
        return product_initial_state(point, self.basis)

    def observables(self, point: PhasePoint, t_max: float, dt: float) -> Observables:
        return observable_run(self.spectrum, self.initial_state(point), t_max, dt, self.basis)


@dataclass(frozen=True)
class TruncationCheck:
    n_max: int
    n_max_ref: int
    max_delta_change: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_delta_change < self.tol


def truncation_check(
    params: ModelParams,
    point: PhasePoint,
    n_max: int,
    t_max: float,
    dt: float,
    extra: int = 20,
    tol: float = 1e-8,
    system: QuantumSystem | None = None,
    reference: QuantumSystem | None = None,
    baseline: Observables | None = None,
) -> TruncationCheck:
    """Compare delta(t) at n_max and n_max + extra (or at the cutoff of ``reference``).

    A cutoff too small to hold the initial coherent state fails outright
    (reported as an infinite change) instead of raising.
    """
    try:
        system = system or QuantumSystem.build(params, n_max)
        base = baseline or system.observables(point, t_max, dt)
    except TruncationError:
        return TruncationCheck(n_max, n_max + extra, math.inf, tol)
    reference = reference or QuantumSystem.build(params, n_max + extra)
    ref = reference.observables(point, t_max, dt)
    change = float(np.max(np.abs(ref.delta.values - base.delta.values)))
    return TruncationCheck(n_max, reference.basis.n_max, change, tol)


def run_observables(
    params: ModelParams,
    point: PhasePoint,
    n_max: int,
    t_max: float,
    dt: float,
    check_truncation: bool = True,
) -> tuple[Observables, TruncationCheck | None]:
    """Build, propagate and (optionally) guard the result against the Fock cutoff."""
    system = QuantumSystem.build(params, n_max)
    obs = system.observables(point, t_max, dt)
    check = None
    if check_truncation:
        check = truncation_check(params, point, n_max, t_max, dt, system=system, baseline=obs)
        if not check.passed:
            raise TruncationError(
                f"delta(t) moved by {check.max_delta_change:.3e} between n_max={n_max} "
                f"and n_max={check.n_max_ref} (limit {check.tol:g})"
            )
    return obs, check


def _spin_coherent_rows(q: np.ndarray, p: np.ndarray, J: float) -> np.ndarray:
    """Spin coherent states for many labels at once, one per row.

    Written as sqrt(C(2J,k)) (p + iq)^k (4J - r^2)^((2J-k)/2) / (4J)^J, which
    stays finite up to and on the border (where it becomes |J, +J>).
    """
    twoJ = int(round(2 * J))
    k = np.arange(twoJ + 1)
    log_binom = gammaln(twoJ + 1) - gammaln(k + 1) - gammaln(twoJ - k + 1)
    z = (p + 1j * q)[:, None]
    rest = np.maximum(4 * J - (q**2 + p**2), 0.0)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        log_rest = np.log(rest)
        # 0 ** 0 = 1 for the k = 2J column on the border
        rest_pow = np.where(k[None, :] == twoJ, 1.0, np.exp(0.5 * (twoJ - k)[None, :] * log_rest))
    return np.exp(0.5 * log_binom)[None, :] * z**k[None, :] * rest_pow / (4 * J) ** J


def _disk_fraction(q: np.ndarray, p: np.ndarray, radius: float, sub: int = 16) -> np.ndarray:
    """Area fraction of each grid cell (centred on the nodes) inside the disk."""
    hq, hp = q[1] - q[0], p[1] - p[0]
    off = (np.arange(sub) + 0.5) / sub - 0.5
    Q, P = np.meshgrid(q, p)
    frac = np.zeros_like(Q)
    for dq in off:
        for dp in off:
            frac += (Q + dq * hq) ** 2 + (P + dp * hp) ** 2 <= radius**2
    return frac / sub**2


def spin_husimi(rho_a: np.ndarray, resolution: int, J: float | None = None) -> HusimiGrid:
    """Q(q_a, p_a) = <w|rho_a|w> on a square grid covering the spin disk.

    Raw values are emitted unweighted. The weights carry the invariant
    measure (2J+1)/(2J) dq dp / (2 pi), under which Q integrates to Tr rho.
    """
    rho_a = np.asarray(rho_a)
    if resolution < 11:
        raise ValueError("resolution must be at least 11")
    J = (rho_a.shape[0] - 1) / 2 if J is None else J
    R = math.sqrt(4 * J)
    axis = np.linspace(-R, R, resolution)
    Qg, Pg = np.meshgrid(axis, axis)
    r = np.hypot(Qg, Pg)
    mask = r**2 <= 4 * J
    frac = _disk_fraction(axis, axis, R)
    touched = frac > 0
    # nodes just outside the disk whose cell overlaps it take the border value
    shrink = np.where(r > R, R / np.where(r > 0, r, 1.0), 1.0)
    qs, ps = (Qg * shrink)[touched], (Pg * shrink)[touched]
    W = _spin_coherent_rows(qs, ps, J)
    vals = np.zeros_like(Qg)
    vals[touched] = np.real(np.einsum("ik,kl,il->i", W.conj(), rho_a, W))
    vals = np.clip(vals, 0.0, 1.0)
    h = axis[1] - axis[0]
    weights = frac * h * h * (2 * J + 1) / (2 * J) / (2 * math.pi)
    return HusimiGrid(q=axis, p=axis, values=vals, mask=mask, weights=weights, J=J)


def husimi_participation(grid: HusimiGrid) -> float:
    """(int Q)^2 / (vol * int Q^2): 1 for a flat distribution, ~cell/vol for a spike."""
    w = grid.weights
    Q = np.clip(grid.values, 0.0, None)
    s1 = float(np.sum(w * Q))
    s2 = float(np.sum(w * Q * Q))
    if s2 <= 0:
        raise ValueError("Husimi grid is identically zero")
    return s1 * s1 / (float(np.sum(w)) * s2)
