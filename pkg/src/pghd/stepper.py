"""IMEX time integration of the temperature-anomaly equation.

The stiff operator A is implicit (backward Euler or Crank-Nicolson); transport,
the v . grad T* coupling and the effective source are explicit with an
Adams-Bashforth-2 extrapolation (forward Euler on the first step).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .advection import advect_tendency, surface_advection
from .diffusion import DiffusionOperator, assemble, horizontal_divq, tstar_compatibility
from .fields import Grid, PhysParams, ScalarField2, ScalarField3, VelocityField
from .ghosts import fill_ghosts
from .velocity import diagnose

log = logging.getLogger(__name__)

Source = Union[None, np.ndarray, ScalarField3, Callable[[float], np.ndarray]]


class Scheme(str, Enum):
    BACKWARD_EULER_AB2 = "backward_euler_AB2"
    CRANK_NICOLSON_AB2 = "crank_nicolson_AB2"


class NumericalError(RuntimeError):
    """Linear-solver failure or non-finite state."""


class CFLError(ValueError):
    pass


@dataclass(frozen=True)
class StepConfig:
    dt: float
    scheme: Scheme = Scheme.BACKWARD_EULER_AB2
    solver_tol: float = 1e-10
    solver_max_iter: int = 2000
    advection: bool = True
    enforce_cfl: bool = True
    cfl_safety: float = 0.5
    cfl_cap: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.solver_tol > 0:
            raise ValueError("solver_tol must be > 0")


@dataclass
class SimState:
    Ttilde: ScalarField3
    t: float = 0.0
    step_index: int = 0
    prev_explicit: Optional[np.ndarray] = field(default=None, repr=False)


def cfl_dt(vel: VelocityField, safety: float = 0.5, cap: float = 1.0) -> float:
    grid = vel.grid
    limits = [cap]
    for comp, d in ((vel.v1, grid.dx), (vel.v2, grid.dy), (vel.w, grid.dz)):
        if comp is None:
            continue
        m = float(np.abs(comp).max())
        if not np.isfinite(m):
            raise NumericalError("non-finite velocity")
        if m > 0:
            limits.append(safety * d / m)
    return min(limits) if len(limits) > 1 else cap


def effective_source(Q: Source, Tstar: Optional[ScalarField2], params: PhysParams,
                     grid: Grid, compat_tol: float = 1e-6) -> np.ndarray:
    """Q* = Q - div q(T*)."""
    q = _as_array(Q, grid, 0.0)
    if Tstar is None:
        return q
    allowance = compat_tol + 4.0 * max(grid.dx, grid.dy) ** 2
    res = tstar_compatibility(Tstar, params)
    if res > allowance:
        warnings.warn(
            f"T* violates the oblique compatibility condition (relative residual {res:.2e})",
            stacklevel=2,
        )
    return q - horizontal_divq(Tstar, params)[:, :, None]


def _as_array(src: Source, grid: Grid, t: float) -> np.ndarray:
    if src is None:
        return np.zeros(grid.shape)
    if callable(src):
        src = src(t)
    if isinstance(src, ScalarField3):
        return src.values
    return np.broadcast_to(np.asarray(src, dtype=float), grid.shape)


class Stepper:
    """Holds the assembled operator and the implicit system for a fixed dt."""

    def __init__(self, grid: Grid, params: PhysParams, config: StepConfig,
                 op: Optional[DiffusionOperator] = None):
        self.grid = grid
        self.params = params
        self.config = config
        self.op = op if op is not None else assemble(grid, params)
        theta = 1.0 if config.scheme is Scheme.BACKWARD_EULER_AB2 else 0.5
        self.theta = theta
        n = self.op.n
        self.lhs = (sp.identity(n, format="csr") + theta * config.dt * self.op.matrix).tocsr()
        d = self.lhs.diagonal()
        self._precond = LinearOperator((n, n), matvec=lambda x: x / d, dtype=float)
        self.last_iterations = 0

    def with_dt(self, dt: float) -> "Stepper":
        return Stepper(self.grid, self.params, replace(self.config, dt=dt), self.op)

    def explicit_tendency(self, Ttilde: ScalarField3, Tstar, Qstar: Source, t: float,
                          vel: Optional[VelocityField] = None):
        params = self.params
        out = _as_array(Qstar, self.grid, t).copy()
        if not self.config.advection:
            return out, vel
        Tg = Ttilde if Ttilde.has_ghosts else fill_ghosts(Ttilde, params)
        if vel is None:
            vel = diagnose(Tg, Tstar, params)
        out += advect_tendency(Tg, vel).values
        if Tstar is not None:
            out -= surface_advection(vel, Tstar, params)
        return out, vel

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        b = rhs.reshape(-1)
        bn = np.linalg.norm(b)
        if bn == 0.0:
            return np.zeros_like(rhs)
        its = [0]

        def cb(_):
            its[0] += 1

        x, info = cg(self.lhs, b, rtol=self.config.solver_tol, atol=0.0,
                     maxiter=self.config.solver_max_iter, M=self._precond, callback=cb)
        res = np.linalg.norm(b - self.lhs @ x) / bn
        self.last_iterations = its[0]
        if info != 0 or not res <= self.config.solver_tol * 1.01:
            raise NumericalError(
                f"linear solver did not converge: relative residual {res:.3e} after {its[0]} iterations"
            )
        return x.reshape(rhs.shape)

    def step(self, state: SimState, Qstar: Source = None, Tstar: Optional[ScalarField2] = None) -> SimState:
        cfg = self.config
        dt = cfg.dt
        T = state.Ttilde
        E, vel = self.explicit_tendency(T, Tstar, Qstar, state.t)
        if cfg.advection and cfg.enforce_cfl and vel is not None:
            limit = cfl_dt(vel, cfg.cfl_safety, cfg.cfl_cap)
            if dt > limit * (1 + 1e-12):
                raise CFLError(f"dt = {dt:.3e} exceeds the CFL limit {limit:.3e}")
        if state.prev_explicit is None:
            Ex = E
        else:
            Ex = 1.5 * E - 0.5 * state.prev_explicit
        rhs = T.values + dt * Ex
        if self.theta != 1.0:
            rhs = rhs - (1.0 - self.theta) * dt * self.op.matvec(T.values)
        new = self.solve(rhs)
        if not np.all(np.isfinite(new)):
            raise NumericalError(f"non-finite temperature at step {state.step_index + 1}")
        return SimState(ScalarField3(self.grid, new), state.t + dt, state.step_index + 1, E)


def step(state: SimState, config: StepConfig, params: PhysParams, grid: Grid,
         Qstar: Source = None, Tstar: Optional[ScalarField2] = None,
         op: Optional[DiffusionOperator] = None) -> SimState:
    """One step; assembles the operator when ``op`` is not supplied."""
    return Stepper(grid, params, config, op).step(state, Qstar, Tstar)
