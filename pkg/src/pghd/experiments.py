"""Drivers shared by the command line and the acceptance checks."""

from __future__ import annotations

import csv
import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .advection import advection_energy, advection_integral
from .config import RunConfig
from .diagnostics import (
    CSV_COLUMNS,
    EnergyReport,
    Trajectory,
    boundary_layer_monitor,
    energy_report,
)
from .diffusion import DiffusionOperator, assemble, bilinear_a
from .fields import Grid, LateralMode, PhysParams, ScalarField2, ScalarField3, column_mean
from .galerkin import compute_basis
from .ghosts import fill_ghosts
from .profiles import surface_profile, volume_profile
from .snapshot import write_snapshot
from .stepper import CFLError, NumericalError, SimState, StepConfig, Stepper, effective_source
from .velocity import continuity_residual, diagnose

log = logging.getLogger(__name__)


@dataclass
class Forcing:
    Tstar: Optional[ScalarField2]
    Q: Optional[ScalarField3]
    Qstar: np.ndarray


def build_forcing(cfg: RunConfig, params: Optional[PhysParams] = None) -> Forcing:
    params = params or cfg.params
    base = cfg.raw.get("__base__")
    Ts = surface_profile(cfg.Tstar, cfg.grid, base)
    Q = volume_profile(cfg.Q, cfg.grid, cfg.seed, base)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        Qs = effective_source(Q, Ts, params, cfg.grid)
    for w in caught:
        log.warning("%s", w.message)
    return Forcing(Ts, Q, Qs)


def initial_state(cfg: RunConfig) -> ScalarField3:
    T0 = volume_profile(cfg.T0, cfg.grid, cfg.seed, cfg.raw.get("__base__"))
    return T0 if T0 is not None else ScalarField3.zeros(cfg.grid)


@dataclass
class RunResult:
    state: SimState
    reports: list = field(default_factory=list)
    trajectory: Optional[Trajectory] = None
    failure: Optional[str] = None


def run_simulation(cfg: RunConfig, params: Optional[PhysParams] = None,
                   T0: Optional[ScalarField3] = None, out_dir: Optional[Path] = None,
                   keep_every: int = 0, op: Optional[DiffusionOperator] = None,
                   forcing: Optional[Forcing] = None,
                   on_step: Optional[Callable[[SimState], None]] = None) -> RunResult:
    """Integrate to ``t_end``; raises CFLError / NumericalError on failure."""
    params = params or cfg.params
    grid = cfg.grid
    forcing = forcing or build_forcing(cfg, params)
    step_cfg = StepConfig(dt=cfg.dt, scheme=cfg.scheme, solver_tol=cfg.solver_tol,
                          enforce_cfl=cfg.enforce_cfl)
    stepper = Stepper(grid, params, step_cfg, op or assemble(grid, params))
    state = SimState(T0 if T0 is not None else initial_state(cfg))
    bl = None if grid.periodic else cfg.bl_width
    res = RunResult(state, [], Trajectory(signature=cfg.signature()) if keep_every else None)

    writer = fh = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        fh = open(out_dir / "diagnostics.csv", "w", newline="", encoding="utf-8")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)

    def record(s: SimState):
        if cfg.diag_every and s.step_index % cfg.diag_every == 0:
            r = energy_report(s, params, grid, Qstar=forcing.Qstar, Tstar=forcing.Tstar, bl_width=bl)
            res.reports.append(r)
            if writer:
                writer.writerow([repr(float(v)) for v in r.row()])
        if out_dir is not None and cfg.snapshot_every and s.step_index % cfg.snapshot_every == 0:
            write_snapshot(s.Ttilde, out_dir / f"T_{s.step_index:06d}.pghd")
        if res.trajectory is not None and s.step_index % keep_every == 0:
            res.trajectory.append(s.t, s.Ttilde.values)

    try:
        record(state)
        for _ in range(cfg.n_steps):
            state = stepper.step(state, forcing.Qstar, forcing.Tstar)
            record(state)
            if on_step:
                on_step(state)
    finally:
        if fh:
            fh.close()
    res.state = state
    if out_dir is not None:
        write_snapshot(state.Ttilde, out_dir / "T_final.pghd")
    return res


# --------------------------------------------------------------------------
# structural checks


@dataclass
class Check:
    name: str
    value: float
    limit: float
    passed: bool
    detail: str = ""


def _random_fields(grid: Grid, n: int, seed: int):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        yield ScalarField3(grid, rng.standard_normal(grid.shape))


def discrete_mode(grid: Grid, k: int, l: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Periodic Fourier-cosine mode and the symbols of Lap and of the vertical operator."""
    X, Y, Z = grid.mesh()
    zeta = (Z + grid.h) / grid.h
    phi = np.cos(2 * np.pi * k * X / grid.Lx + 2 * np.pi * l * Y / grid.Ly) * np.cos(m * np.pi * zeta)
    lap = -(4 / grid.dx**2) * math.sin(math.pi * k * grid.dx / grid.Lx) ** 2 - (
        4 / grid.dy**2) * math.sin(math.pi * l * grid.dy / grid.Ly) ** 2
    zz = -(4 / grid.dz**2) * math.sin(m * math.pi * grid.dz / (2 * grid.h)) ** 2
    return phi, np.array([lap, zz])


def discrete_dispersion(params: PhysParams, lap: float, zz: float) -> float:
    return params.lam * lap**2 - params.K_h * lap + params.mu * lap * zz - params.K_v * zz


def verify_suite(cfg: RunConfig, n_random: int = 20, seed: int = 1234) -> list[Check]:
    grid, params = cfg.grid, cfg.params
    checks: list[Check] = []
    op = assemble(grid, params)
    checks.append(Check("operator asymmetry after symmetrisation", op.asymmetry_after, 1e-12,
                        op.asymmetry_after <= 1e-12))
    checks.append(Check("operator asymmetry before symmetrisation", op.asymmetry_before, 1e-2,
                        op.asymmetry_before <= 1e-2))
    lam1 = float(compute_basis(op, 1).eigenvalues[0])
    if params.alpha > 0:
        checks.append(Check("minimum eigenvalue > 0", lam1, 0.0, lam1 > 0))
    else:
        tol = 1e-10 * abs(op.matrix).max()
        checks.append(Check("minimum eigenvalue >= 0", lam1, -tol, lam1 >= -tol))

    worst = 0.0
    for R in _random_fields(grid, n_random, seed):
        a = bilinear_a(R, R, params)
        b = float(np.vdot(op.matvec(R.values), R.values) * grid.dV)
        worst = max(worst, abs(a - b) / abs(b))
    checks.append(Check("a(R,R) = <AR,R>", worst, 1e-8, worst <= 1e-8))

    Tstar = surface_profile(cfg.Tstar, grid, cfg.raw.get("__base__"))
    cont = mean = wtop = adv = plain = 0.0
    for R in _random_fields(grid, n_random, seed + 1):
        Rg = fill_ghosts(R, params)
        vel = diagnose(Rg, Tstar, params)
        scale = vel.max_abs()
        inv_d = 1 / grid.dx + 1 / grid.dy + 1 / grid.dz
        cont = max(cont, np.abs(continuity_residual(vel)).max() / (scale * inv_d))
        vmax = max(np.abs(vel.v1).max(), np.abs(vel.v2).max())
        mean = max(mean, max(np.abs(column_mean(vel.v1, grid)).max(),
                             np.abs(column_mean(vel.v2, grid)).max()) / vmax)
        wtop = max(wtop, np.abs(vel.w[..., -1]).max() / scale)
        bound = math.sqrt(np.sum(R.values**2) * grid.dV) * scale * grid.volume
        adv = max(adv, abs(advection_energy(Rg, vel)) / bound)
        plain = max(plain, abs(advection_integral(Rg, vel)) / bound)
    checks.append(Check("discrete continuity residual", cont, 1e-12, cont <= 1e-12))
    checks.append(Check("w at the surface", wtop, 1e-12, wtop <= 1e-12))
    checks.append(Check("depth-mean horizontal velocity", mean, 1e-12, mean <= 1e-12))
    checks.append(Check("advective energy (skew-symmetry)", adv, 1e-10, adv <= 1e-10))
    checks.append(Check("advective integral", plain, 1e-10, plain <= 1e-10))

    # closed-form oracle: a periodic Fourier mode is an exact eigenvector of the
    # discrete operator when beta = alpha = 0
    pgrid = Grid(grid.nx, grid.ny, grid.nz, grid.Lx, grid.Ly, grid.h, LateralMode.PERIODIC_TEST)
    pparams = params.replace(alpha=0.0, beta=0.0)
    pop = assemble(pgrid, pparams)
    worst = 0.0
    for k, l, m in ((1, 0, 0), (0, 1, 1), (1, 1, 2), (2, 1, 1)):
        phi, (lap, zz) = discrete_mode(pgrid, k, l, m)
        sigma = discrete_dispersion(pparams, lap, zz)
        r = np.abs(pop.matvec(phi) - sigma * phi).max() / (abs(sigma) * np.abs(phi).max())
        worst = max(worst, r)
    checks.append(Check("Fourier modes match the discrete dispersion relation", worst, 1e-10, worst <= 1e-10))
    return checks


def format_checks(checks: list[Check]) -> str:
    width = max(len(c.name) for c in checks)
    lines = []
    for c in checks:
        mark = "PASS" if c.passed else "FAIL"
        lines.append(f"{mark}  {c.name:<{width}}  value={c.value:.3e}  limit={c.limit:.1e}")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# lambda > 0 versus lambda = 0


@dataclass
class CompareResult:
    t: np.ndarray
    monitor_hyper: np.ndarray
    monitor_plain: np.ndarray
    hyper_failure: Optional[str]
    plain_failure: Optional[str]
    threshold: float = 10.0

    @property
    def hyper_bounded(self) -> bool:
        m0 = self.monitor_hyper[0]
        return self.hyper_failure is None and bool(np.all(self.monitor_hyper < self.threshold * m0))

    @property
    def plain_unstable(self) -> bool:
        m0 = self.monitor_plain[0]
        vals = self.monitor_plain[np.isfinite(self.monitor_plain)]
        return self.plain_failure is not None or bool(np.any(vals >= self.threshold * m0)) or len(vals) < len(
            self.monitor_plain)


def _monitored_run(cfg: RunConfig, params: PhysParams, T0: ScalarField3, enforce_cfl: bool):
    series = [boundary_layer_monitor(T0, cfg.grid, cfg.bl_width)]
    times = [0.0]

    def on_step(s):
        times.append(s.t)
        series.append(boundary_layer_monitor(s.Ttilde, cfg.grid, cfg.bl_width))

    quiet = replace(cfg, diag_every=0, enforce_cfl=enforce_cfl)
    failure = None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            run_simulation(quiet, params, T0, on_step=on_step)
    except (NumericalError, CFLError) as exc:
        failure = str(exc)
    return np.array(times), np.array(series), failure


def compare_runs(cfg: RunConfig, threshold: float = 10.0) -> CompareResult:
    """Same setup with the configured lambda and with lambda = 0 (K_h kept).

    The lambda = 0 run is integrated without the CFL guard so that a blow-up
    shows up as growth or a non-finite state rather than an early stop.
    """
    if cfg.grid.periodic:
        raise ValueError("compare needs lateral walls (physical mode)")
    if cfg.params.lam == 0:
        raise ValueError("compare needs lambda > 0 in the configuration")
    T0 = initial_state(cfg)
    t1, m1, f1 = _monitored_run(cfg, cfg.params, T0, cfg.enforce_cfl)
    # without hyper-diffusion the run is expected to diverge; let it
    t0, m0, f0 = _monitored_run(cfg, cfg.params.replace(lam=0.0), T0, False)
    n = len(t1)
    plain = np.full(n, np.nan)
    plain[: min(n, len(m0))] = m0[:n]
    return CompareResult(t1, m1, plain, f1, f0, threshold)


def write_compare_csv(res: CompareResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "bl_grad_lambda", "bl_grad_lambda0"])
        for t, a, b in zip(res.t, res.monitor_hyper, res.monitor_plain):
            w.writerow([repr(float(t)), repr(float(a)), repr(float(b))])


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0
