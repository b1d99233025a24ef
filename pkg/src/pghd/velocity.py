"""Diagnostic velocity and pressure from the temperature field.

Horizontal velocity follows from frictional-geostrophic balance plus
hydrostatics: its vertical shear is  gamma (eps T_x + f T_y, -f T_x + eps T_y)
and its depth mean vanishes.  ``w`` is accumulated column-wise from the
discrete horizontal divergence of the face-interpolated velocity, so the
discrete continuity equation holds exactly.
"""

from __future__ import annotations

import numpy as np

from .fields import (
    NG,
    Grid,
    PhysParams,
    ScalarField2,
    ScalarField3,
    VelocityField,
    column_mean,
    depth_integral,
)
from .ghosts import fill_ghosts2


def _centred_gradient(g: np.ndarray, grid: Grid):
    """Centred x/y derivatives at interior cells of a laterally ghosted array."""
    c = slice(NG, -NG)
    tx = (g[NG + 1 : -NG + 1 or None, c] - g[NG - 1 : -NG - 1, c]) / (2 * grid.dx)
    ty = (g[c, NG + 1 : -NG + 1 or None] - g[c, NG - 1 : -NG - 1]) / (2 * grid.dy)
    return tx, ty


def horizontal_gradient(T: ScalarField3):
    g = T.require_ghosts()[:, :, NG:-NG]
    return _centred_gradient(g, T.grid)


def surface_gradient(Ts: ScalarField2, params: PhysParams):
    g = fill_ghosts2(Ts, params)[:, :, None]
    tx, ty = _centred_gradient(g, Ts.grid)
    return tx[:, :, 0], ty[:, :, 0]


def shear(tx, ty, grid: Grid, params: PhysParams):
    """Vertical shear (dv1/dz, dv2/dz) implied by a temperature gradient."""
    f = params.coriolis(grid.y)[None, :]
    gam = params.gamma(grid.y)[None, :]
    if tx.ndim == 3:
        f, gam = f[..., None], gam[..., None]
    eps = params.epsilon
    return gam * (eps * tx + f * ty), gam * (-f * tx + eps * ty)


def diagnose_v(Ttilde: ScalarField3, Tstar: ScalarField2 | None, params: PhysParams) -> VelocityField:
    """Horizontal velocity at cell centres (``w`` left unset)."""
    grid = Ttilde.grid
    tx, ty = horizontal_gradient(Ttilde)
    s1, s2 = shear(tx, ty, grid, params)
    v1 = depth_integral(s1, grid)
    v2 = depth_integral(s2, grid)
    v1 -= column_mean(v1, grid)[..., None]
    v2 -= column_mean(v2, grid)[..., None]
    if Tstar is not None:
        sx, sy = surface_gradient(Tstar, params)
        b1, b2 = shear(sx, sy, grid, params)
        zeta = (grid.z + 0.5 * grid.h)[None, None, :]
        v1 = v1 + zeta * b1[..., None]
        v2 = v2 + zeta * b2[..., None]
    return VelocityField(grid, v1, v2, None)


def face_velocities(vel: VelocityField):
    """Normal velocity on x-faces (nx+1, ny, nz) and y-faces (nx, ny+1, nz).

    Centred interpolation; wall faces carry no normal flow.
    """
    grid = vel.grid
    nx, ny, nz = grid.shape
    u = np.zeros((nx + 1, ny, nz))
    v = np.zeros((nx, ny + 1, nz))
    u[1:-1] = 0.5 * (vel.v1[1:] + vel.v1[:-1])
    v[:, 1:-1] = 0.5 * (vel.v2[:, 1:] + vel.v2[:, :-1])
    if grid.periodic:
        u[0] = u[-1] = 0.5 * (vel.v1[0] + vel.v1[-1])
        v[:, 0] = v[:, -1] = 0.5 * (vel.v2[:, 0] + vel.v2[:, -1])
    return u, v


def horizontal_divergence(vel: VelocityField) -> np.ndarray:
    grid = vel.grid
    u, v = face_velocities(vel)
    return (u[1:] - u[:-1]) / grid.dx + (v[:, 1:] - v[:, :-1]) / grid.dy


def diagnose_w(vel: VelocityField) -> VelocityField:
    """Fill ``w`` on z-interfaces by integrating continuity up from z = -h."""
    div = horizontal_divergence(vel)
    w = -depth_integral(div, vel.grid, at="interfaces")
    return VelocityField(vel.grid, vel.v1, vel.v2, w)


def diagnose(Ttilde: ScalarField3, Tstar: ScalarField2 | None, params: PhysParams) -> VelocityField:
    return diagnose_w(diagnose_v(Ttilde, Tstar, params))


def continuity_residual(vel: VelocityField) -> np.ndarray:
    """div_h v + delta_z w per cell."""
    if vel.w is None:
        raise ValueError("w not diagnosed")
    return horizontal_divergence(vel) + np.diff(vel.w, axis=2) / vel.grid.dz


def reconstruct_pressure(Ttilde: ScalarField3, Tstar: ScalarField2 | None, params: PhysParams) -> ScalarField3:
    """Hydrostatic pressure with zero depth mean in every column."""
    grid = Ttilde.grid
    T = Ttilde.values
    if Tstar is not None:
        T = T + Tstar.values[:, :, None]
    p = -depth_integral(T, grid)
    p -= column_mean(p, grid)[..., None]
    return ScalarField3(grid, p)
