"""Config-driven experiment runner and invariant verifier.

Config files are flat ``key = value`` lines with ``#`` comments. Initial
conditions go under ``ic`` or labelled ``ic.<name>`` keys, either as four
numbers (q_a, p_a, q_f, p_f) or as two (q_a, p_a), in which case q_f = 0
and p_f is solved from ``energy``. Section runs move four-number initial
conditions onto the configured energy shell by re-solving p_f.
"""
from __future__ import annotations

import json
import logging
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import classical as cl
from . import quantum as qm
from .model import BorderError, ModelParams, PhasePoint, TruncationError, build_operators

log = logging.getLogger(__name__)


KINDS = ("section", "orbit", "evolve", "husimi")
TIMESERIES_COLUMNS = ("t", "delta", "ddelta_dt", "jz_over_J")
OUT_ENV = "JCM_OUT"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    params: ModelParams = field(default_factory=ModelParams)
    energy: float | None = None
    ics: dict[str, tuple[float, ...]] = field(default_factory=dict)
    n_max: int = 120
    dt: float = 0.01
    t_max: float = 50.0
    tol: float = cl.DEFAULT_TOL
    resolution: int = 101
    snapshots: tuple[float, ...] = ()
    n_crossings: int = 300
    scan: int = 0
    refine: bool = True
    truncation_check: bool = True
    name: str = "experiment"

    def phase_points(self) -> dict[str, PhasePoint]:
        """Resolve every initial condition to a full phase point."""
        out = {}
        for label, vals in self.ics.items():
            key = "ic" if label == "" else f"ic.{label}"
            if len(vals) == 4:
                out[label] = PhasePoint(*vals)
            else:
                if self.energy is None:
                    raise ConfigError(key, "two-value initial conditions need 'energy'")
                try:
                    p_f = cl.solve_pf_for_energy(vals[0], vals[1], 0.0, self.energy, self.params)
                except (cl.OffShellError, BorderError) as exc:
                    raise ConfigError(key, str(exc)) from exc
                out[label] = PhasePoint(vals[0], vals[1], 0.0, p_f)
        return out


_FLOAT_KEYS = {"energy", "dt", "t_max", "tol"}
_INT_KEYS = {"n_max", "resolution", "n_crossings", "scan"}
_BOOL_KEYS = {"refine", "truncation_check"}
_PARAM_KEYS = {"J", "omega0", "epsilon", "G", "Gprime"}


def parse_config_text(text: str, name: str = "experiment") -> ExperimentConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in raw:
            raise ConfigError(key, f"duplicate key (line {lineno})")
        raw[key] = value

    def num(key, cast=float):
        try:
            return cast(raw[key])
        except ValueError:
            raise ConfigError(key, f"not a valid {cast.__name__}: {raw[key]!r}") from None

    kw: dict = {"name": raw.pop("name", name)}
    if "kind" not in raw:
        raise ConfigError("kind", f"missing; one of {', '.join(KINDS)}")
    kw["kind"] = raw.pop("kind")
    if kw["kind"] not in KINDS:
        raise ConfigError("kind", f"must be one of {', '.join(KINDS)}, got {kw['kind']!r}")

    pkw = {}
    ics = {}
    for key in list(raw):
        if key in _PARAM_KEYS:
            pkw[key] = num(key)
        elif key in _FLOAT_KEYS:
            kw[key] = num(key)
        elif key in _INT_KEYS:
            kw[key] = num(key, int)
        elif key in _BOOL_KEYS:
            v = raw[key].lower()
            if v not in ("true", "false", "yes", "no", "1", "0"):
                raise ConfigError(key, f"expected true/false, got {raw[key]!r}")
            kw[key] = v in ("true", "yes", "1")
        elif key == "snapshots":
            try:
                kw[key] = tuple(float(s) for s in raw[key].split(",") if s.strip())
            except ValueError:
                raise ConfigError(key, f"expected comma-separated times, got {raw[key]!r}") from None
        elif key == "ic" or key.startswith("ic."):
            label = key[3:]
            try:
                vals = tuple(float(s) for s in raw[key].split(","))
            except ValueError:
                raise ConfigError(key, f"expected comma-separated numbers, got {raw[key]!r}") from None
            if len(vals) not in (2, 4):
                raise ConfigError(key, f"expected 2 or 4 numbers, got {len(vals)}")
            ics[label] = vals
        else:
            raise ConfigError(key, "unknown key")
    try:
        kw["params"] = ModelParams(**pkw)
    except ValueError as exc:
        raise ConfigError("params", str(exc)) from None
    kw["ics"] = ics
    cfg = ExperimentConfig(**kw)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    for key in ("dt", "t_max", "tol"):
        if not getattr(cfg, key) > 0:
            raise ConfigError(key, "must be positive")
    for key in ("n_max", "resolution", "n_crossings"):
        if getattr(cfg, key) <= 0:
            raise ConfigError(key, "must be positive")
    if cfg.scan < 0:
        raise ConfigError("scan", "must be non-negative")
    if cfg.kind == "section":
        if cfg.energy is None:
            raise ConfigError("energy", "required for section runs")
        if not cfg.ics and cfg.scan == 0:
            raise ConfigError("ic", "section runs need initial conditions or 'scan'")
    elif not cfg.ics:
        raise ConfigError("ic", f"{cfg.kind} runs need at least one initial condition")
    if cfg.kind == "orbit" and cfg.refine and cfg.energy is None:
        raise ConfigError("energy", "required to refine periodic orbits")
    if cfg.kind in ("evolve", "husimi"):
        if cfg.dt >= cfg.t_max:
            raise ConfigError("dt", "must be smaller than t_max")
        if cfg.dt > 0.02:
            raise ConfigError("dt", "entropy rate needs dt <= 0.02")
    if cfg.kind == "husimi":
        if not cfg.snapshots:
            raise ConfigError("snapshots", "required for husimi runs")
        if any(t < 0 for t in cfg.snapshots):
            raise ConfigError("snapshots", "times must be non-negative")
        if cfg.resolution < 11:
            raise ConfigError("resolution", "must be at least 11")
        if len(cfg.ics) != 1:
            raise ConfigError("ic", "husimi runs take exactly one initial condition")
    cfg.phase_points()


def preset_names() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("njcm.presets").iterdir() if p.name.endswith(".cfg"))


def load_config(source: str | os.PathLike) -> ExperimentConfig:
    """Read a config file, or a shipped preset by name (e.g. ``fig3a``)."""
    path = Path(source)
    if path.is_file():
        return parse_config_text(path.read_text(), name=path.stem)
    if str(source) in preset_names():
        text = resources.files("njcm.presets").joinpath(f"{source}.cfg").read_text()
        return parse_config_text(text, name=str(source))
    raise ConfigError("config", f"no such file or preset: {source}")


# --- output ---------------------------------------------------------------


def fmt(x) -> str:
    """Shortest round-trip decimal for a float."""
    return repr(float(x))


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def timeseries_csv(obs: qm.Observables) -> str:
    cols = (obs.t, obs.delta.values, obs.rate.values, obs.jz_over_J.values)
    return csv_text(TIMESERIES_COLUMNS, zip(*cols))


def husimi_text(grid: qm.HusimiGrid, t: float) -> str:
    lines = [
        f"# spin Husimi Q(q_a, p_a) at t = {fmt(t)}, J = {fmt(grid.J)}",
        "# rows: p_a ascending; columns: q_a ascending; 0 outside the disk",
        "# q_a: " + " ".join(fmt(v) for v in grid.q),
        "# p_a: " + " ".join(fmt(v) for v in grid.p),
    ]
    lines += [" ".join(fmt(v) for v in row) for row in grid.values]
    return "\n".join(lines) + "\n"


def read_husimi_text(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    q = p = None
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# q_a:"):
            q = np.array(line[6:].split(), dtype=float)
        elif line.startswith("# p_a:"):
            p = np.array(line[6:].split(), dtype=float)
        elif line and not line.startswith("#"):
            rows.append([float(v) for v in line.split()])
    return q, p, np.array(rows)


def _label_suffix(label: str) -> str:
    return f"_{label}" if label else ""


# --- runs -----------------------------------------------------------------


@dataclass
class RunResult:
    config: ExperimentConfig
    outputs: list[str]
    summary: dict


def scan_initial_conditions(n: int, E: float, params: ModelParams) -> list[PhasePoint]:
    """n x n grid over the (q_a, p_a) disk, keeping points with a positive p_f on the shell."""
    R = math.sqrt(4 * params.J)
    axis = np.linspace(-R, R, n + 2)[1:-1]
    points = []
    for p_a in axis:
        for q_a in axis:
            if q_a**2 + p_a**2 >= 4 * params.J * (1 - 1e-9):
                continue
            try:
                p_f = cl.solve_pf_for_energy(q_a, p_a, 0.0, E, params)
            except (cl.OffShellError, BorderError):
                continue
            points.append(PhasePoint(float(q_a), float(p_a), 0.0, p_f))
    return points


def _section_worker(args):
    point, params, E, n, tol = args
    return cl.poincare_section([point], params, E, n, tol=tol)[0]


def _map(fn, items, threads: int):
    if threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _onto_shell(point: PhasePoint, E: float, params: ModelParams) -> PhasePoint:
    """Re-solve p_f so a rounded initial condition sits exactly on the E shell."""
    p_f = cl.solve_pf_for_energy(point.q_a, point.p_a, point.q_f, E, params)
    return PhasePoint(point.q_a, point.p_a, point.q_f, p_f)


def run_section(cfg: ExperimentConfig, out: Path, threads: int = 1) -> RunResult:
    points, adjusted = [], {}
    for label, point in cfg.phase_points().items():
        off = abs(cl.classical_hamiltonian(point, cfg.params) - cfg.energy)
        if off > 1e-8 * max(1.0, abs(cfg.energy)):
            moved = _onto_shell(point, cfg.energy, cfg.params)
            log.info("ic %s is %.2e off the shell; p_f %r -> %r", label or "ic", off, point.p_f, moved.p_f)
            adjusted[label or "ic"] = {"energy_offset": off, "p_f": point.p_f, "p_f_on_shell": moved.p_f}
            point = moved
        points.append((label, point))
    if cfg.scan:
        points += [(f"scan{i}", p) for i, p in enumerate(scan_initial_conditions(cfg.scan, cfg.energy, cfg.params))]
    jobs = [(p, cfg.params, cfg.energy, cfg.n_crossings, cfg.tol) for _, p in points]
    sections = _map(_section_worker, jobs, threads)
    rows = []
    worst = 0.0
    for (label, _), crossings in zip(points, sections):
        for k, sp in enumerate(crossings, 1):
            e = cl.classical_hamiltonian((sp.q_a, sp.p_a, 0.0, sp.p_f), cfg.params)
            worst = max(worst, abs(e - cfg.energy))
            rows.append((label or "ic", str(k), sp.t_cross, sp.q_a, sp.p_a, sp.p_f))
    path = out / "section.csv"
    atomic_write(path, csv_text(("ic", "crossing", "t", "q_a", "p_a", "p_f"), rows))
    summary = {"n_ics": len(points), "n_points": len(rows), "max_energy_error": worst, "ic_adjustments": adjusted}
    return RunResult(cfg, [path.name], summary)


def _trajectory_csv(traj: cl.Trajectory, params: ModelParams) -> str:
    r = np.hypot(traj.y[:, 0], traj.y[:, 1])
    e = cl.energy_array(traj.y, params)
    rows = zip(traj.t, traj.y[:, 0], traj.y[:, 1], traj.y[:, 2], traj.y[:, 3], r, e)
    return csv_text(("t", "q_a", "p_a", "q_f", "p_f", "r", "energy"), rows)


def run_orbit(cfg: ExperimentConfig, out: Path, threads: int = 1) -> RunResult:
    outputs, rows, info = [], [], {}
    for label, point in cfg.phase_points().items():
        tag = label or "ic"
        if cfg.refine:
            orbit = cl.refine_periodic_orbit((point.q_a, point.p_a), cfg.params, cfg.energy)
            start, t_end = orbit.ic, orbit.period
            rows.append((tag, point.q_a, point.p_a, orbit.ic.p_a, orbit.ic.p_f, orbit.period,
                         orbit.residual, orbit.trace, "stable" if orbit.stable else "unstable", str(orbit.multiplicity)))
            info[tag] = {"period": orbit.period, "residual": orbit.residual, "trace": orbit.trace,
                         "stable": orbit.stable, "multiplicity": orbit.multiplicity}
        else:
            start, t_end = point, cfg.t_max
        n = max(2, int(round(t_end / cfg.dt)) + 1)
        traj = cl.integrate_trajectory(start, cfg.params, (0.0, t_end), tol=cfg.tol, t_eval=np.linspace(0.0, t_end, n))
        info.setdefault(tag, {})["energy_drift"] = traj.energy_drift
        path = out / f"trajectory{_label_suffix(label)}.csv"
        atomic_write(path, _trajectory_csv(traj, cfg.params))
        outputs.append(path.name)
    if rows:
        path = out / "orbits.csv"
        header = ("ic", "seed_q_a", "seed_p_a", "p_a", "p_f", "period", "residual", "trace", "stability", "multiplicity")
        atomic_write(path, csv_text(header, rows))
        outputs.insert(0, path.name)
    return RunResult(cfg, outputs, {"orbits": info})


def _truncation_summary(check: qm.TruncationCheck | None):
    if check is None:
        return None
    return {"n_max": check.n_max, "n_max_ref": check.n_max_ref,
            "max_delta_change": check.max_delta_change, "passed": check.passed}


def run_evolve(cfg: ExperimentConfig, out: Path, threads: int = 1) -> RunResult:
    system = qm.QuantumSystem.build(cfg.params, cfg.n_max)
    reference = None
    outputs, info = [], {}
    for label, point in cfg.phase_points().items():
        obs = system.observables(point, cfg.t_max, cfg.dt)
        check = None
        if cfg.truncation_check:
            reference = reference or qm.QuantumSystem.build(cfg.params, cfg.n_max + 20)
            check = qm.truncation_check(cfg.params, point, cfg.n_max, cfg.t_max, cfg.dt,
                                        system=system, reference=reference, baseline=obs)
            if not check.passed:
                raise TruncationError(
                    f"ic {label or 'ic'}: delta(t) changed by {check.max_delta_change:.3e} "
                    f"from n_max={cfg.n_max} to {cfg.n_max + 20}"
                )
        psi0 = system.initial_state(point)
        path = out / f"timeseries{_label_suffix(label)}.csv"
        atomic_write(path, timeseries_csv(obs))
        outputs.append(path.name)
        info[label or "ic"] = {
            "classical_energy": cl.classical_hamiltonian(point, cfg.params),
            "quantum_energy": float(np.vdot(psi0, system.hamiltonian @ psi0).real),
            "delta_0": float(obs.delta.values[0]),
            "delta_max": float(obs.delta.values.max()),
            "truncation": _truncation_summary(check),
        }
    return RunResult(cfg, outputs, {"ics": info, "dim": system.basis.dim_total})


def run_husimi(cfg: ExperimentConfig, out: Path, threads: int = 1) -> RunResult:
    system = qm.QuantumSystem.build(cfg.params, cfg.n_max)
    (label, point), = cfg.phase_points().items()
    psi0 = system.initial_state(point)
    outputs, info = [], {}
    for t in cfg.snapshots:
        rho = qm.reduced_density_atom(qm.evolve(system.spectrum, psi0, t), system.basis)
        grid = qm.spin_husimi(rho, cfg.resolution, cfg.params.J)
        path = out / f"husimi_t{fmt(t)}.txt"
        atomic_write(path, husimi_text(grid, t))
        outputs.append(path.name)
        info[fmt(t)] = {"participation": qm.husimi_participation(grid),
                        "normalization": grid.normalization,
                        "linear_entropy": float(qm.linear_entropy(rho))}
    check = None
    if cfg.truncation_check:
        t_end = max(max(cfg.snapshots), 10 * cfg.dt)
        check = qm.truncation_check(cfg.params, point, cfg.n_max, t_end, cfg.dt, system=system)
        if not check.passed:
            raise TruncationError(f"delta(t) changed by {check.max_delta_change:.3e} under n_max + 20")
    return RunResult(cfg, outputs, {"snapshots": info, "truncation": _truncation_summary(check)})


RUNNERS = {"section": run_section, "orbit": run_orbit, "evolve": run_evolve, "husimi": run_husimi}


def default_out_dir(cfg: ExperimentConfig) -> Path:
    return Path(os.environ.get(OUT_ENV, "jcm-out")) / cfg.name


def run(cfg: ExperimentConfig, out: Path | None = None, threads: int = 1) -> RunResult:
    out = Path(out) if out is not None else default_out_dir(cfg)
    start = time.perf_counter()
    result = RUNNERS[cfg.kind](cfg, out, threads)
    result.summary.update({
        "name": cfg.name,
        "kind": cfg.kind,
        "outputs": result.outputs,
        "elapsed_s": time.perf_counter() - start,
    })
    atomic_write(out / "summary.json", json.dumps(result.summary, indent=2, default=_json_default) + "\n")
    return result


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(type(x))


# --- verification -----------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    measured: float
    limit: float
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.note})" if self.note else ""
        return f"{status} {self.name}: measured {self.measured:.3e}, limit {self.limit:.1e}{extra}"


@dataclass
class VerificationReport:
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self) -> list[str]:
        return [c.name for c in self.checks]

    def text(self) -> str:
        return "\n".join(c.line() for c in self.checks) + "\n"


def _check(name, measured, limit, note=""):
    return Check(name, bool(measured < limit), float(measured), float(limit), note)


def classical_checks(cfg: ExperimentConfig, points: dict[str, PhasePoint], seed: int = 0) -> list[Check]:
    params = cfg.params
    rng = np.random.default_rng(seed)
    R = math.sqrt(4 * params.J)
    worst = 0.0
    h = 1e-6
    for _ in range(50):
        r, phi = 0.95 * R * math.sqrt(rng.random()), 2 * math.pi * rng.random()
        y = np.array([r * math.cos(phi), r * math.sin(phi), *rng.uniform(-4, 4, 2)])
        g = np.array([(cl.classical_hamiltonian(y + h * e, params) - cl.classical_hamiltonian(y - h * e, params)) / (2 * h)
                      for e in np.eye(4)])
        expected = np.array([-g[1], g[0], -g[3], g[2]])
        worst = max(worst, float(np.max(np.abs(cl.eom_rhs(y, params) - expected))))
    checks = [_check("eom_gradient_consistency", worst, 1e-6, "50 random interior points")]
    drift, inside = 0.0, -math.inf
    for point in points.values():
        traj = cl.integrate_trajectory(point, params, (0.0, 100.0), tol=cfg.tol)
        scale = max(1.0, abs(cl.classical_hamiltonian(point, params)))
        drift = max(drift, traj.energy_drift / scale)
        inside = max(inside, float(np.max(traj.y[:, 0] ** 2 + traj.y[:, 1] ** 2)) - 4 * params.J)
    if points:
        checks.append(_check("classical_energy_drift", drift, 1e-8, "relative to max(1, |E|), t in [0, 100]"))
        checks.append(Check("spin_bound", inside <= 0, inside, 0.0, "max(q_a^2 + p_a^2) - 4J along the flow"))
    return checks


def quantum_checks(cfg: ExperimentConfig, points: dict[str, PhasePoint], horizon: float = 100.0) -> list[Check]:
    params = cfg.params
    system = qm.QuantumSystem.build(params, cfg.n_max)
    H = system.hamiltonian
    checks = [_check("hermiticity", float(np.max(np.abs(H - H.conj().T))), 1e-14)]
    basis = system.basis
    ops = build_operators(basis) if params.Gprime == 0 or params.G == 0 else None
    reference = None
    for label, point in points.items():
        tag = f"[{label}]" if label else ""
        try:
            psi0 = system.initial_state(point)
        except TruncationError as exc:
            checks.append(Check(f"initial_state{tag}", False, math.inf, 0.0, str(exc)))
            checks.append(Check(f"truncation_doubling{tag}", False, math.inf, 1e-8, "initial state does not fit the cutoff"))
            continue
        e_cl = cl.classical_hamiltonian(point, params)
        e_q = float(np.vdot(psi0, H @ psi0).real)
        checks.append(_check(f"quantum_classical_energy{tag}", abs(e_q - e_cl), 1e-8))

        times = np.linspace(0.0, horizon, 201)
        states = qm.evolve(system.spectrum, psi0, times)
        norms = np.abs(np.linalg.norm(states, axis=1) - 1.0)
        energies = np.real(np.einsum("ti,ij,tj->t", states.conj(), H, states))
        checks.append(_check(f"unitarity_norm{tag}", float(norms.max()), 1e-9, f"t in [0, {horizon:g}]"))
        checks.append(_check(f"unitarity_energy{tag}", float(np.max(np.abs(energies - energies[0]))), 1e-9))

        rho_a = qm.reduced_density_atom(states, basis)
        rho_f = qm.reduced_density_field(states[::10], basis)
        d_a = qm.linear_entropy(rho_a)
        d_f = qm.linear_entropy(rho_f)
        checks.append(_check(f"schmidt_symmetry{tag}", float(np.max(np.abs(d_a[::10] - d_f))), 1e-9))
        upper = 1 - 1 / basis.dim_spin
        excess = max(float(-d_a.min()), float(d_a.max() - upper), 0.0)
        checks.append(Check(f"entropy_bounds{tag}", excess <= 1e-12, excess, 1e-12, f"0 <= delta <= {upper:g}"))

        for flag, op, name in ((params.Gprime == 0, "total_excitation", "P"),
                               (params.G == 0, "relative_excitation", "P'")):
            if flag:
                Pm = getattr(ops, op)()
                vals = np.real(np.einsum("ti,ij,tj->t", states.conj(), Pm, states))
                checks.append(_check(f"conserved_{name}{tag}", float(np.max(np.abs(vals - vals[0]))), 1e-9))

        t_end = min(cfg.t_max, horizon)
        # doubled cutoff as the reference
        reference = reference or qm.QuantumSystem.build(params, 2 * cfg.n_max)
        tc = qm.truncation_check(params, point, cfg.n_max, t_end, cfg.dt, system=system, reference=reference)
        checks.append(_check(f"truncation_doubling{tag}", tc.max_delta_change, tc.tol,
                             f"n_max {tc.n_max} -> {tc.n_max_ref}, t in [0, {t_end:g}]"))
    return checks


def verify(cfg: ExperimentConfig) -> VerificationReport:
    """Run every invariant that applies to the configured experiment."""
    points = cfg.phase_points()
    checks = classical_checks(cfg, points)
    if cfg.kind in ("evolve", "husimi"):
        checks += quantum_checks(cfg, points)
    return VerificationReport(checks)


def write_report(report: VerificationReport, out: Path) -> Path:
    path = out / "verify.txt"
    atomic_write(path, report.text())
    return path


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    new = replace(cfg, **kw)
    validate(new)
    return new
