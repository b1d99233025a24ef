"""Manufactured-solution convergence studies in the doubly periodic test mode.

An analytic temperature is pushed through the continuous equation (including
the diagnosed velocity and the nonlinear transport) with sympy; the resulting
source drives the grid solver and the error against the analytic field gives
observed orders of accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sy

from .diffusion import assemble
from .fields import Grid, LateralMode, PhysParams, ScalarField3
from .stepper import Scheme, SimState, StepConfig, Stepper

x, y, z, t = sy.symbols("x y z t", real=True)


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    dt: float
    error: float
    order: float  # nan on the first row


def exact_expression(Lx: float, Ly: float, h: float):
    """Smooth periodic field with Neumann top and bottom; not separable."""
    Lx, Ly, h = (sy.nsimplify(v) for v in (Lx, Ly, h))
    # arguments are kept expanded: sympy mis-integrates some factored forms
    # such as sin(pi (z + 1)) over a finite interval
    zeta = sy.expand(sy.pi * (z + h) / h)
    kx, ky = 2 * sy.pi / Lx, 2 * sy.pi / Ly
    return sy.exp(-t) * sy.cos(kx * x) * sy.sin(ky * y) * sy.cos(zeta) + (
        sy.Rational(1, 2) + sy.sin(3 * t) / 4
    ) * sy.sin(kx * x + ky * y) * sy.cos(2 * zeta)


@lru_cache(maxsize=8)
def _symbolic(params: PhysParams, Lx: float, Ly: float):
    """Symbolic T, v1, v2, w and the source Q that makes T an exact solution."""
    if params.beta != 0 or params.alpha != 0:
        raise ValueError("manufactured solutions assume beta = 0 and alpha = 0")
    # exact rationals: definite integrals with float limits are unreliable
    h = sy.nsimplify(params.h)
    T = exact_expression(Lx, Ly, h)
    eps, f = sy.Float(params.epsilon), sy.Float(params.f0)
    gam = 1 / (eps**2 + f**2)
    zp = sy.Symbol("zp", real=True)

    def column_integral(expr):
        return sy.integrate(expr.subs(z, zp), (zp, -h, z))

    def zero_mean(expr):
        return expr - sy.integrate(expr, (z, -h, 0)) / h

    Tx, Ty = sy.diff(T, x), sy.diff(T, y)
    v1 = zero_mean(column_integral(gam * (eps * Tx + f * Ty)))
    v2 = zero_mean(column_integral(gam * (-f * Tx + eps * Ty)))
    w = -column_integral(sy.diff(v1, x) + sy.diff(v2, y))
    lap = lambda e: sy.diff(e, x, 2) + sy.diff(e, y, 2)  # noqa: E731
    Tzz = sy.diff(T, z, 2)
    AT = (params.lam * lap(lap(T)) - params.K_h * lap(T)
          + params.mu * lap(Tzz) - params.K_v * Tzz)
    Q = sy.diff(T, t) + v1 * Tx + v2 * Ty + w * sy.diff(T, z) + AT
    return T, v1, v2, w, Q


@lru_cache(maxsize=8)
def _manufactured(params: PhysParams, Lx: float, Ly: float):
    T, _, _, _, Q = _symbolic(params, Lx, Ly)
    return (sy.lambdify((x, y, z, t), T, "numpy"), sy.lambdify((x, y, z, t), Q, "numpy"))


def manufactured(params: PhysParams, grid: Grid):
    """Return callables ``T(t)`` and ``Q(t)`` giving arrays on ``grid``."""
    Tf, Qf = _manufactured(params, grid.Lx, grid.Ly)
    X, Y, Z = grid.mesh()

    def T_at(tt: float) -> np.ndarray:
        return np.broadcast_to(Tf(X, Y, Z, tt), grid.shape).astype(float)

    def Q_at(tt: float) -> np.ndarray:
        return np.broadcast_to(Qf(X, Y, Z, tt), grid.shape).astype(float)

    return T_at, Q_at


def manufactured_fields(params: PhysParams, Lx: float = 1.0, Ly: float = 1.0):
    """Numpy callables ``(x, y, z, t)`` for T, v1, v2, w and the transport v . grad T."""
    T, v1, v2, w, _ = _symbolic(params, Lx, Ly)
    transport = v1 * sy.diff(T, x) + v2 * sy.diff(T, y) + w * sy.diff(T, z)
    args = (x, y, z, t)
    return {name: sy.lambdify(args, e, "numpy")
            for name, e in (("T", T), ("v1", v1), ("v2", v2), ("w", w), ("transport", transport))}


def default_params() -> PhysParams:
    return PhysParams(beta=0.0, alpha=0.0)


def _run(grid: Grid, params: PhysParams, dt: float, t_end: float, scheme: Scheme,
         solver_tol: float = 1e-12) -> np.ndarray:
    T_at, Q_at = manufactured(params, grid)
    n = int(round(t_end / dt))
    if not math.isclose(n * dt, t_end, rel_tol=1e-9):
        raise ValueError("t_end must be a whole number of steps")
    cfg = StepConfig(dt=dt, scheme=scheme, solver_tol=solver_tol, solver_max_iter=20000)
    st = Stepper(grid, params, cfg, assemble(grid, params))
    s = SimState(ScalarField3(grid, T_at(0.0)))
    for _ in range(n):
        s = st.step(s, Q_at)
    return s.Ttilde.values


def _orders(errors):
    out = [float("nan")]
    for a, b in zip(errors[:-1], errors[1:]):
        out.append(math.log2(a / b) if a > 0 and b > 0 else float("nan"))
    return out


def spatial_convergence(n0: int = 16, levels: int = 3, params: PhysParams | None = None,
                        t_end: float = 0.1, courant: float = 0.1,
                        scheme: Scheme = Scheme.CRANK_NICOLSON_AB2) -> list[ConvergenceRow]:
    """Errors on n x n x n/2 grids, n = n0 2^i, with dt proportional to dx.

    With a second-order time scheme the combined error then falls like dx^2.
    """
    params = params or default_params()
    rows, errs, meta = [], [], []
    for i in range(levels):
        n = n0 * 2**i
        grid = Grid(n, n, max(4, n // 2), 1.0, 1.0, params.h, LateralMode.PERIODIC_TEST)
        steps = max(1, int(round(t_end / (courant * grid.dx))))
        dt = t_end / steps
        T_num = _run(grid, params, dt, t_end, scheme)
        T_ex = manufactured(params, grid)[0](t_end)
        errs.append(float(np.sqrt(np.sum((T_num - T_ex) ** 2) * grid.dV)))
        meta.append((n, dt))
    for (n, dt), e, o in zip(meta, errs, _orders(errs)):
        rows.append(ConvergenceRow(n, dt, e, o))
    return rows


def temporal_convergence(scheme: Scheme, n: int = 16, levels: int = 4, dt0: float = 0.02,
                         t_end: float = 0.16, params: PhysParams | None = None) -> list[ConvergenceRow]:
    """Self-convergence in dt on a fixed grid: e_k = |T_dt_k - T_dt_(k+1)|."""
    params = params or default_params()
    grid = Grid(n, n, max(4, n // 2), 1.0, 1.0, params.h, LateralMode.PERIODIC_TEST)
    sols, dts = [], []
    for i in range(levels + 1):
        dt = dt0 / 2**i
        sols.append(_run(grid, params, dt, t_end, scheme))
        dts.append(dt)
    errs = [float(np.sqrt(np.sum((a - b) ** 2) * grid.dV)) for a, b in zip(sols[:-1], sols[1:])]
    return [ConvergenceRow(n, dt, e, o) for dt, e, o in zip(dts, errs, _orders(errs))]


def format_table(title: str, rows: list[ConvergenceRow]) -> str:
    lines = [title, f"{'n':>5} {'dt':>11} {'error':>12} {'order':>7}"]
    for r in rows:
        o = "" if math.isnan(r.order) else f"{r.order:7.3f}"
        lines.append(f"{r.n:>5} {r.dt:11.4e} {r.error:12.4e} {o:>7}")
    return "\n".join(lines)
