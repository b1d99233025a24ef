"""Centred flux-form transport  -(div(v T) + d_z(w T)).

With face velocities obeying the discrete continuity equation and no normal
flow through any wall, the operator is skew-symmetric in the discrete L2
inner product: it neither creates nor destroys  sum T^2 dV.
"""

from __future__ import annotations

import numpy as np

from .fields import NG, PhysParams, ScalarField2, ScalarField3, VelocityField, inner_l2
from .velocity import continuity_residual, face_velocities, surface_gradient

INCOMPRESSIBILITY_TOL = 1e-10


class IncompressibilityError(ValueError):
    pass


def _check_incompressible(vel: VelocityField, tol: float = INCOMPRESSIBILITY_TOL) -> None:
    grid = vel.grid
    res = np.abs(continuity_residual(vel)).max()
    scale = vel.max_abs() * (1.0 / grid.dx + 1.0 / grid.dy + 1.0 / grid.dz)
    if res > tol * max(scale, 1e-300):
        raise IncompressibilityError(
            f"discrete continuity violated: max residual {res:.3e} (scale {scale:.3e})"
        )


def advective_fluxes(T: ScalarField3, vel: VelocityField):
    grid = T.grid
    nx, ny, nz = grid.shape
    g = T.require_ghosts()[:, :, NG:-NG]
    c = slice(NG, -NG)
    u, v = face_velocities(vel)
    tfx = 0.5 * (g[1 : nx + 2, c] + g[2 : nx + 3, c])
    tfy = 0.5 * (g[c, 1 : ny + 2] + g[c, 2 : ny + 3])
    Fx = u * tfx
    Fy = v * tfy
    Fz = np.zeros((nx, ny, nz + 1))
    a = T.values
    Fz[..., 1:-1] = vel.w[..., 1:-1] * 0.5 * (a[..., 1:] + a[..., :-1])
    return Fx, Fy, Fz


def advect_tendency(T: ScalarField3, vel: VelocityField, check: bool = True) -> ScalarField3:
    """-(v . grad T + w T_z) in conservative form."""
    if vel.w is None:
        raise ValueError("velocity has no w; run diagnose_w first")
    if check:
        _check_incompressible(vel)
    grid = T.grid
    Fx, Fy, Fz = advective_fluxes(T, vel)
    div = (
        (Fx[1:] - Fx[:-1]) / grid.dx
        + (Fy[:, 1:] - Fy[:, :-1]) / grid.dy
        + (Fz[..., 1:] - Fz[..., :-1]) / grid.dz
    )
    return ScalarField3(grid, -div)


def advection_energy(T: ScalarField3, vel: VelocityField) -> float:
    """Integral of (v . grad T + w T_z) T; zero up to rounding."""
    return inner_l2(ScalarField3(T.grid, -advect_tendency(T, vel).values), T)


def advection_integral(T: ScalarField3, vel: VelocityField) -> float:
    """Plain integral of (v . grad T + w T_z) over the box."""
    return float(-advect_tendency(T, vel).values.sum() * T.grid.dV)


def surface_advection(vel: VelocityField, Tstar: ScalarField2, params: PhysParams) -> np.ndarray:
    """v . grad T* at cell centres (T* is depth independent)."""
    sx, sy = surface_gradient(Tstar, params)
    return vel.v1 * sx[..., None] + vel.v2 * sy[..., None]
