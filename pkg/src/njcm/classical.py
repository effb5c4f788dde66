"""Classical limit: energy function, flow, Poincare sections and periodic orbits.

The flow uses the sign convention q_dot = -dH/dp, p_dot = +dH/dq for both
degrees of freedom. It is the time-reversed canonical flow, so it conserves
the energy and preserves the section area, and it reproduces the published
sections and orbit shapes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .model import BORDER_REL_TOL, BorderError, ModelParams, PhasePoint

DEFAULT_TOL = 1e-10


class IntegrationError(RuntimeError):
    pass


class OffShellError(ValueError):
    """No positive field momentum puts the requested point on the energy shell."""


class ConvergenceError(RuntimeError):
    pass


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray  # shape (len(t), 4): q_a, p_a, q_f, p_f
    energy_drift: float
    dense: object = field(default=None, repr=False)
    events: tuple = field(default=((), ()), repr=False)

    @property
    def points(self) -> list[PhasePoint]:
        return [PhasePoint.from_array(row) for row in self.y]

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True)
class SectionPoint:
    q_a: float
    p_a: float
    t_cross: float
    p_f: float


@dataclass(frozen=True)
class PeriodicOrbit:
    ic: PhasePoint
    period: float
    residual: float
    stability: tuple[complex, complex]
    multiplicity: int
    monodromy: np.ndarray = field(repr=False, compare=False)

    @property
    def trace(self) -> float:
        return float(np.trace(self.monodromy))

    @property
    def stable(self) -> bool:
        return abs(self.trace) < 2.0


@dataclass(frozen=True)
class SpinProjection:
    t: np.ndarray
    q_a: np.ndarray
    p_a: np.ndarray
    border_radius: float

    @property
    def radius(self) -> np.ndarray:
        return np.hypot(self.q_a, self.p_a)


def _radicand(r2, J):
    return np.maximum(1.0 - r2 / (4.0 * J), 0.0)


def classical_hamiltonian(point: PhasePoint | np.ndarray, params: ModelParams) -> float:
    q_a, p_a, q_f, p_f = point.as_array() if isinstance(point, PhasePoint) else point
    r2 = q_a**2 + p_a**2
    if r2 > 4 * params.J * (1 + 1e-14):
        raise BorderError(f"q_a^2 + p_a^2 = {r2:.15g} exceeds 4J = {4 * params.J:g}")
    s = math.sqrt(max(1.0 - r2 / (4 * params.J), 0.0))
    return (
        0.5 * params.omega0 * (p_f**2 + q_f**2)
        + 0.5 * params.epsilon * (r2 - 2 * params.J)
        + s * (params.Gplus * p_a * p_f + params.Gminus * q_a * q_f)
    )


def energy_array(y: np.ndarray, params: ModelParams) -> np.ndarray:
    """Vectorised classical energy over rows of an (N, 4) array."""
    q_a, p_a, q_f, p_f = np.asarray(y, dtype=float).T
    r2 = q_a**2 + p_a**2
    s = np.sqrt(_radicand(r2, params.J))
    return (
        0.5 * params.omega0 * (p_f**2 + q_f**2)
        + 0.5 * params.epsilon * (r2 - 2 * params.J)
        + s * (params.Gplus * p_a * p_f + params.Gminus * q_a * q_f)
    )


def _rhs(y, params: ModelParams):
    q_a, p_a, q_f, p_f = y
    J = params.J
    Gp, Gm = params.Gplus, params.Gminus
    r2 = q_a * q_a + p_a * p_a
    s = math.sqrt(max(1.0 - r2 / (4 * J), 0.0))
    # coupling / sqrt(4J) / sqrt(4J - r2) == coupling / (4J s)
    coupling = (Gp * p_a * p_f + Gm * q_a * q_f) / (4 * J * s) if s > 0 else 0.0
    return np.array([
        -params.epsilon * p_a - Gp * p_f * s + p_a * coupling,
        params.epsilon * q_a + Gm * q_f * s - q_a * coupling,
        -params.omega0 * p_f - Gp * p_a * s,
        params.omega0 * q_f + Gm * q_a * s,
    ])


def eom_rhs(point: PhasePoint | np.ndarray, params: ModelParams) -> np.ndarray:
    """Rates (q_a_dot, p_a_dot, q_f_dot, p_f_dot).

    Note the component order follows the state vector (q_a, p_a, q_f, p_f).
    """
    y = point.as_array() if isinstance(point, PhasePoint) else np.asarray(point, dtype=float)
    if y[0] ** 2 + y[1] ** 2 > 4 * params.J * (1 - BORDER_REL_TOL):
        raise BorderError("flow is singular on the spin-disk border")
    return _rhs(y, params)


def integrate_trajectory(
    ic: PhasePoint | np.ndarray,
    params: ModelParams,
    t_span: tuple[float, float],
    tol: float = DEFAULT_TOL,
    t_eval: np.ndarray | None = None,
    events=None,
    max_step: float = np.inf,
) -> Trajectory:
    """Integrate the flow with DOP853 (8(5,3) embedded pair, dense output).

    ``tol`` is used as the relative tolerance; the absolute tolerance is
    tol * 1e-2 so the O(1) coordinates are resolved well past tol.
    """
    y0 = ic.as_array() if isinstance(ic, PhasePoint) else np.asarray(ic, dtype=float)
    limit = 4 * params.J * (1 - BORDER_REL_TOL)
    if y0[0] ** 2 + y0[1] ** 2 >= limit:
        raise BorderError("initial condition on or outside the spin-disk border")

    sol = solve_ivp(
        lambda t, y: _rhs(y, params),
        t_span,
        y0,
        method="DOP853",
        rtol=tol,
        atol=tol * 1e-2,
        dense_output=True,
        t_eval=t_eval,
        events=events,
        max_step=max_step,
    )
    if sol.status == -1:
        raise IntegrationError(f"integration failed: {sol.message}")
    y = sol.y.T
    r2 = y[:, 0] ** 2 + y[:, 1] ** 2
    if np.any(r2 > 4 * params.J):
        raise BorderError(f"trajectory left the spin disk (max r^2 = {r2.max():.15g})")
    e = energy_array(y, params)
    e0 = classical_hamiltonian(y0, params)
    return Trajectory(
        t=sol.t,
        y=y,
        energy_drift=float(np.max(np.abs(e - e0))),
        dense=sol.sol,
        events=(sol.t_events, sol.y_events),
    )


def solve_pf_for_energy(q_a: float, p_a: float, q_f: float, E: float, params: ModelParams) -> float:
    """Largest positive p_f with H(q_a, p_a, q_f, p_f) = E.

    The energy is quadratic in p_f, (omega0/2) p_f^2 + b p_f + c = E.
    The largest root is also the one whose crossing of q_f = 0 runs in the
    q_f_dot < 0 direction.
    """
    r2 = q_a**2 + p_a**2
    if r2 > 4 * params.J:
        raise BorderError("spin label outside the disk")
    s = math.sqrt(max(1.0 - r2 / (4 * params.J), 0.0))
    A = 0.5 * params.omega0
    b = s * params.Gplus * p_a
    c = 0.5 * params.omega0 * q_f**2 + 0.5 * params.epsilon * (r2 - 2 * params.J) + s * params.Gminus * q_a * q_f - E
    disc = b * b - 4 * A * c
    if disc < 0:
        raise OffShellError(f"no real p_f reaches E={E} at (q_a={q_a}, p_a={p_a}, q_f={q_f})")
    root = (-b + math.sqrt(disc)) / (2 * A)
    if root <= 0:
        raise OffShellError(f"no positive p_f reaches E={E} at (q_a={q_a}, p_a={p_a}, q_f={q_f})")
    # one Newton polish step; the closed form can lose a few ulps when b^2 >> |4Ac|
    f = A * root * root + b * root + c
    root -= f / (2 * A * root + b)
    return root


def section_state(q_a: float, p_a: float, E: float, params: ModelParams) -> np.ndarray:
    return np.array([q_a, p_a, 0.0, solve_pf_for_energy(q_a, p_a, 0.0, E, params)])


def _crossing_event():
    def event(t, y):
        return y[2]

    event.direction = -1
    return event


def _find_crossings(y0, params, n_crossings, tol, t_chunk=50.0, t_limit=None):
    """Integrate until n_crossings downward passes of q_f = 0 with p_f > 0 are found."""
    t_limit = t_limit if t_limit is not None else 400.0 + 200.0 * n_crossings
    out_t, out_y = [], []
    t0, y = 0.0, np.asarray(y0, dtype=float)
    ev = _crossing_event()
    while len(out_t) < n_crossings:
        if t0 >= t_limit:
            raise IntegrationError(f"only {len(out_t)} of {n_crossings} section crossings by t={t_limit}")
        traj = integrate_trajectory(y, params, (t0, t0 + t_chunk), tol=tol, events=[ev])
        (te,), (ye,) = traj.events
        for tc, yc in zip(te, ye):
            # the start point may itself sit on the section
            if tc <= t0 + 1e-9:
                continue
            if yc[3] > 0:
                out_t.append(tc)
                out_y.append(yc)
                if len(out_t) == n_crossings:
                    break
        t0, y = traj.t[-1], traj.y[-1]
    return np.array(out_t), np.array(out_y)


def poincare_section(
    ics,
    params: ModelParams,
    E: float | None,
    n_crossings: int,
    tol: float = DEFAULT_TOL,
) -> list[list[SectionPoint]]:
    """Crossings of q_f = 0 (with p_f > 0, q_f decreasing) for each initial condition."""
    result = []
    for ic in ics:
        y0 = ic.as_array() if isinstance(ic, PhasePoint) else np.asarray(ic, dtype=float)
        if E is not None:
            off = abs(classical_hamiltonian(y0, params) - E)
            if off > 1e-8 * max(1.0, abs(E)):
                raise OffShellError(f"initial condition is {off:.3e} off the E={E} shell")
        ts, ys = _find_crossings(y0, params, n_crossings, tol)
        result.append([SectionPoint(float(y[0]), float(y[1]), float(t), float(y[3])) for t, y in zip(ts, ys)])
    return result


def return_map(x: np.ndarray, E: float, params: ModelParams, k: int = 1, tol: float = 1e-12):
    """k-th section return of the on-shell point (q_a, p_a); returns (image, time)."""
    y0 = section_state(x[0], x[1], E, params)
    ts, ys = _find_crossings(y0, params, k, tol)
    return ys[-1, :2], ts[-1]


def _detect_multiplicity(x0, E, params, max_k=4, near=2e-2):
    """Smallest k whose k-th return lands within ``near`` of the seed.

    Falls back to the closest return. A rounded seed near an elliptic fixed
    point precesses around it, so the closest return is not always k = 1.
    """
    y0 = section_state(x0[0], x0[1], E, params)
    _, ys = _find_crossings(y0, params, max_k, 1e-10)
    dist = np.linalg.norm(ys[:, :2] - x0, axis=1)
    close = np.flatnonzero(dist < near)
    return int(close[0] if close.size else np.argmin(dist)) + 1


def refine_periodic_orbit(
    guess: SectionPoint | tuple[float, float],
    params: ModelParams,
    E: float,
    multiplicity: int | None = None,
    max_iter: int = 50,
    tol: float = 1e-8,
    fd_step: float = 1e-6,
) -> PeriodicOrbit:
    """Newton iteration for a fixed point of the k-th section return map.

    The Jacobian of the map is built by central differences; the same matrix
    at the converged point is the linearised return map whose trace decides
    stability. ``multiplicity`` (k) defaults to the first return that comes
    back close to the seed, which picks k = 2 for orbits piercing the section
    twice per period.
    """
    x = np.array([guess.q_a, guess.p_a] if isinstance(guess, SectionPoint) else guess, dtype=float)
    k = multiplicity or _detect_multiplicity(x, E, params)

    def jac(x):
        M = np.empty((2, 2))
        for j in range(2):
            h = np.zeros(2)
            h[j] = fd_step
            fp, _ = return_map(x + h, E, params, k)
            fm, _ = return_map(x - h, E, params, k)
            M[:, j] = (fp - fm) / (2 * fd_step)
        return M

    for _ in range(max_iter):
        image, period = return_map(x, E, params, k)
        F = image - x
        residual = float(np.linalg.norm(F))
        if residual < tol:
            M = jac(x)
            eig = np.linalg.eigvals(M)
            return PeriodicOrbit(
                ic=PhasePoint.from_array(section_state(x[0], x[1], E, params)),
                period=float(period),
                residual=residual,
                stability=(complex(eig[0]), complex(eig[1])),
                multiplicity=k,
                monodromy=M,
            )
        A = jac(x) - np.eye(2)
        if abs(np.linalg.det(A)) < 1e-14:
            raise ConvergenceError("return-map Jacobian minus identity is singular")
        step = np.linalg.solve(A, -F)
        # damp steps that would leave the disk
        while np.sum((x + step) ** 2) >= 4 * params.J * (1 - 1e-9):
            step *= 0.5
        x = x + step
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations (residual {residual:.3e})")


def spin_projection(traj: Trajectory, params: ModelParams) -> SpinProjection:
    return SpinProjection(t=traj.t, q_a=traj.y[:, 0], p_a=traj.y[:, 1], border_radius=math.sqrt(4 * params.J))


def classical_jz(y: np.ndarray, params: ModelParams) -> np.ndarray:
    """Classical atomic inversion r^2/2 - J along rows of an (N, 4) array."""
    y = np.atleast_2d(y)
    return 0.5 * (y[:, 0] ** 2 + y[:, 1] ** 2) - params.J
