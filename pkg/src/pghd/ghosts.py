"""Ghost-cell filling for the homogeneous boundary conditions.

Lateral walls (physical mode):
  first layer   oblique condition  n . H^T grad T = 0, i.e. eps dT/dn + f dT/ds = 0,
                one-sided normal difference, centred tangential difference;
  second layer  zero wall-normal hyper-diffusive flux q(T) . n = 0, solved for the
                outer ghost;
  corners       mean of the two edge-wise linear extrapolations.
Vertical: Neumann at z = -h, Robin  T_z + (alpha/K_v) T = 0  at z = 0 with the
face value taken as the mean of the two neighbouring cells.
Periodic test mode wraps both horizontal directions.
"""

from __future__ import annotations

import numpy as np

from .fields import NG, Grid, PhysParams, ScalarField2, ScalarField3


def tangential_matrix(n: int, d: float) -> np.ndarray:
    """Centred first difference with one-sided ends, as a dense n x n matrix."""
    D = np.zeros((n, n))
    idx = np.arange(1, n - 1)
    D[idx, idx + 1] = 0.5 / d
    D[idx, idx - 1] = -0.5 / d
    D[0, 0], D[0, 1] = -1.0 / d, 1.0 / d
    D[-1, -1], D[-1, -2] = 1.0 / d, -1.0 / d
    return D


def robin_ratio(grid: Grid, params: PhysParams) -> float:
    """Top ghost / top interior ratio for the second-order Robin closure."""
    c = params.alpha * grid.dz / (2.0 * params.K_v)
    return (1.0 - c) / (1.0 + c)


def alpha_eff(grid: Grid, params: PhysParams) -> float:
    """Surface coefficient the discrete Robin closure actually applies."""
    return params.alpha / (1.0 + params.alpha * grid.dz / (2.0 * params.K_v))


def _fill_corners(g: np.ndarray) -> None:
    # each corner ghost = mean of a linear extrapolation along x and along y
    nxg, nyg = g.shape[:2]
    for ci in (0, 1, nxg - 2, nxg - 1):
        for cj in (0, 1, nyg - 2, nyg - 1):
            if ci < 2:
                ia, ib, di = 2, 3, 2 - ci
            else:
                ia, ib, di = nxg - 3, nxg - 4, ci - (nxg - 3)
            if cj < 2:
                ja, jb, dj = 2, 3, 2 - cj
            else:
                ja, jb, dj = nyg - 3, nyg - 4, cj - (nyg - 3)
            along_y = g[ci, ja] + dj * (g[ci, ja] - g[ci, jb])
            along_x = g[ia, cj] + di * (g[ia, cj] - g[ib, cj])
            g[ci, cj] = 0.5 * (along_x + along_y)


def _second_diff(line: np.ndarray, d: float) -> np.ndarray:
    """Second difference along axis 0 of a ghost-extended line, interior part."""
    return (line[2:] - 2.0 * line[1:-1] + line[:-2]) / d**2


def _outer_ghost(c1, c0, G1, zz0, zzG1, s, dn, ds, fe, params, x_wall, D_t):
    """Solve the wall-normal flux condition for the second ghost layer.

    Lines are passed with their full tangential extent (ghosts included); the
    return value covers the interior tangential range only.  The elliptic core
    is evaluated with its closed form  Lap T - (beta/eps) T_x.
    """
    sl = slice(2, -2)
    eps, beta = params.epsilon, params.beta
    lap0 = (c1[sl] - 2 * c0[sl] + G1[sl]) / dn**2 + _second_diff(c0[1:-1], ds)
    if x_wall:
        tx0 = (c1[sl] - G1[sl]) / (2 * dn) * (-s)
    else:
        tx0 = D_t @ c0[sl] if c0.ndim == 1 else np.tensordot(D_t, c0[sl], axes=(1, 0))
    psi0 = lap0 - beta / eps * tx0
    dtan_psi0 = np.tensordot(D_t, psi0, axes=(1, 0))
    normal_T = s * (G1[sl] - c0[sl]) / dn
    normal_zz = s * (zzG1[sl] - zz0[sl]) / dn if zz0 is not None else 0.0
    if params.lam == 0:
        return 2 * G1[sl] - c0[sl]
    # x-wall: psi_x = (f/eps) psi_y + (K_h T_x - mu T_zz,x)/lam
    # y-wall: psi_y = -(f/eps) psi_x + (K_h T_y - mu T_zz,y)/lam
    sign = 1.0 if x_wall else -1.0
    psi_n = sign * fe * dtan_psi0 + (params.K_h * normal_T - params.mu * normal_zz) / params.lam
    psi_g = psi0 + s * dn * psi_n
    tang2 = _second_diff(G1[1:-1], ds)
    if x_wall:
        coef = 1.0 / dn**2 - s * beta / (2 * eps * dn)
        rest = (c0[sl] - 2 * G1[sl]) / dn**2 + tang2 + s * beta * c0[sl] / (2 * eps * dn)
    else:
        coef = 1.0 / dn**2
        rest = (
            (c0[sl] - 2 * G1[sl]) / dn**2
            + tang2
            - beta / eps * np.tensordot(D_t, G1[sl], axes=(1, 0))
        )
    return (psi_g - rest) / coef


def fill_lateral(a: np.ndarray, grid: Grid, params: PhysParams, zz: np.ndarray | None = None,
                 second_layer: bool = True) -> np.ndarray:
    """Pad ``a`` (nx, ny, K) with two lateral ghost layers -> (nx+4, ny+4, K).

    ``zz`` is the vertical second derivative of ``a`` (same shape), needed only by
    the second-layer flux condition; ``None`` means it vanishes.
    """
    if grid.periodic:
        return np.pad(a, ((NG, NG), (NG, NG), (0, 0)), mode="wrap")
    nx, ny = grid.nx, grid.ny
    dx, dy, eps = grid.dx, grid.dy, params.epsilon
    Dx = tangential_matrix(nx, dx)
    Dy = tangential_matrix(ny, dy)
    fe_c = (params.coriolis(grid.y) / eps)[:, None]
    fe_s = params.coriolis(0.0) / eps
    fe_n = params.coriolis(grid.Ly) / eps

    g = np.zeros((nx + 2 * NG, ny + 2 * NG) + a.shape[2:])
    g[NG:-NG, NG:-NG] = a
    c_w, c_e = a[0], a[-1]
    r_s, r_n = a[:, 0], a[:, -1]
    g[1, NG:-NG] = c_w + dx * fe_c * np.tensordot(Dy, c_w, axes=(1, 0))
    g[-2, NG:-NG] = c_e - dx * fe_c * np.tensordot(Dy, c_e, axes=(1, 0))
    g[NG:-NG, 1] = r_s - dy * fe_s * np.tensordot(Dx, r_s, axes=(1, 0))
    g[NG:-NG, -2] = r_n + dy * fe_n * np.tensordot(Dx, r_n, axes=(1, 0))
    _fill_corners(g)
    if not second_layer:
        return g

    if zz is not None:
        zg = fill_lateral(zz, grid, params, None, second_layer=False)
    else:
        zg = None

    def zl(*idx):
        return None if zg is None else zg[idx]

    fe_c1 = fe_c
    g0 = g.copy()
    g[0, NG:-NG] = _outer_ghost(g0[3], g0[2], g0[1], zl(2), zl(1), -1, dx, dy, fe_c1, params, True, Dy)
    g[-1, NG:-NG] = _outer_ghost(g0[-4], g0[-3], g0[-2], zl(-3), zl(-2), 1, dx, dy, fe_c1, params, True, Dy)
    g[NG:-NG, 0] = _outer_ghost(g0[:, 3], g0[:, 2], g0[:, 1], zl(slice(None), 2), zl(slice(None), 1),
                                -1, dy, dx, fe_s, params, False, Dx)
    g[NG:-NG, -1] = _outer_ghost(g0[:, -4], g0[:, -3], g0[:, -2], zl(slice(None), -3), zl(slice(None), -2),
                                 1, dy, dx, fe_n, params, False, Dx)
    _fill_corners(g)
    return g


def fill_vertical(g: np.ndarray, grid: Grid, params: PhysParams) -> np.ndarray:
    """Pad the last axis with Neumann (bottom) and Robin (top) ghosts."""
    r = robin_ratio(grid, params)
    out = np.empty(g.shape[:-1] + (g.shape[-1] + 2 * NG,))
    out[..., NG:-NG] = g
    out[..., 1] = g[..., 0]
    out[..., 0] = g[..., 1]
    out[..., -2] = r * g[..., -1]
    out[..., -1] = r * g[..., -2]
    return out


def dzz(a: np.ndarray, grid: Grid, params: PhysParams) -> np.ndarray:
    """Vertical second difference with the Neumann/Robin closures."""
    r = robin_ratio(grid, params)
    p = np.empty(a.shape[:-1] + (a.shape[-1] + 2,))
    p[..., 1:-1] = a
    p[..., 0] = a[..., 0]
    p[..., -1] = r * a[..., -1]
    return (p[..., 2:] - 2.0 * a + p[..., :-2]) / grid.dz**2


def fill_ghosts(T: ScalarField3, params: PhysParams) -> ScalarField3:
    """Return a copy of ``T`` whose ghost layers satisfy the boundary conditions."""
    grid = T.grid
    zz = dzz(T.values, grid, params)
    g = fill_lateral(T.values, grid, params, zz)
    out = ScalarField3(grid, T.values.copy())
    out.ghosted = fill_vertical(g, grid, params)
    return out


def fill_ghosts2(Ts: ScalarField2, params: PhysParams) -> np.ndarray:
    """Ghost-extended copy of a surface field, shape (nx+4, ny+4)."""
    return fill_lateral(Ts.values[:, :, None], Ts.grid, params, None)[:, :, 0]
