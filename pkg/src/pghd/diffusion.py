"""Hyper-diffusion operator  A R = div q(R) - K_v R_zz  with its boundary conditions.

The discrete operator is built variationally:

    A = lam * E^T E  + K_h * (-Lap)  + mu * (-Lap)(-Z)  + K_v * (-Z)

where ``E`` is the finite-volume elliptic core  div(H^T grad .)  whose wall
fluxes vanish (this is the oblique condition), ``Lap`` the horizontal
Laplacian with zero wall flux, and ``Z`` the vertical second difference with
Neumann bottom / Robin top closures.  ``E^T`` is the discrete
div(H grad .) carrying the flux condition q . n = 0, so A is symmetric and
a(R, R) = <A R, R> holds to rounding.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .fields import NG, Grid, GridMismatchError, PhysParams, ScalarField2, ScalarField3
from .ghosts import (
    alpha_eff,
    dzz,
    fill_ghosts,
    fill_lateral,
    robin_ratio,
    tangential_matrix,
)

log = logging.getLogger(__name__)

DEFAULT_CAP = 200_000


class AssemblyTooLarge(RuntimeError):
    pass


def h_matrix(params: PhysParams, y) -> np.ndarray:
    """H(y) = [[1, -f/eps], [f/eps, 1]], stacked over ``y``."""
    fe = np.asarray(params.coriolis(y)) / params.epsilon
    H = np.empty(fe.shape + (2, 2))
    H[..., 0, 0] = 1.0
    H[..., 0, 1] = -fe
    H[..., 1, 0] = fe
    H[..., 1, 1] = 1.0
    return H


def _check_h(grid: Grid, params: PhysParams):
    if not np.isclose(grid.h, params.h):
        raise GridMismatchError(f"grid depth {grid.h} != params.h {params.h}")


# --------------------------------------------------------------------------
# horizontal elliptic core on ghosted arrays, and its exact adjoint


def _coriolis_faces(grid: Grid, params: PhysParams):
    eps = params.epsilon
    fe_c = params.coriolis(grid.y) / eps  # x-faces share the cell-centre y
    fe_f = params.coriolis(np.arange(grid.ny + 1) * grid.dy) / eps  # y-faces
    return fe_c[None, :, None], fe_f[None, :, None]


def _core_fluxes(g: np.ndarray, grid: Grid, params: PhysParams):
    """Face fluxes of H^T grad T from a laterally ghosted array (nx+4, ny+4, K)."""
    nx, ny = grid.nx, grid.ny
    dx, dy = grid.dx, grid.dy
    fe_c, fe_f = _coriolis_faces(grid, params)
    gx = (g[1:] - g[:-1]) / dx
    gy = (g[:, 1:] - g[:, :-1]) / dy
    avg_y = 0.25 * (
        gy[1 : nx + 2, 1 : ny + 1]
        + gy[1 : nx + 2, 2 : ny + 2]
        + gy[2 : nx + 3, 1 : ny + 1]
        + gy[2 : nx + 3, 2 : ny + 2]
    )
    Fx = gx[1 : nx + 2, 2 : ny + 2] + fe_c * avg_y
    avg_x = 0.25 * (
        gx[1 : nx + 1, 1 : ny + 2]
        + gx[2 : nx + 2, 1 : ny + 2]
        + gx[1 : nx + 1, 2 : ny + 3]
        + gx[2 : nx + 2, 2 : ny + 3]
    )
    Fy = gy[2 : nx + 2, 1 : ny + 2] - fe_f * avg_x
    if not grid.periodic:
        Fx[0] = Fx[-1] = 0.0
        Fy[:, 0] = Fy[:, -1] = 0.0
    return Fx, Fy


def _div_faces(Fx, Fy, grid: Grid):
    return (Fx[1:] - Fx[:-1]) / grid.dx + (Fy[:, 1:] - Fy[:, :-1]) / grid.dy


def core_from_ghosted(g: np.ndarray, grid: Grid, params: PhysParams) -> np.ndarray:
    Fx, Fy = _core_fluxes(g, grid, params)
    return _div_faces(Fx, Fy, grid)


def core_horizontal(a: np.ndarray, grid: Grid, params: PhysParams) -> np.ndarray:
    """div(H^T grad a) for an interior array (nx, ny, K)."""
    g = fill_lateral(a, grid, params, second_layer=False)
    return core_from_ghosted(g, grid, params)


def core_adjoint(lam_: np.ndarray, grid: Grid, params: PhysParams) -> np.ndarray:
    """Transpose of :func:`core_horizontal` (ghost fill included)."""
    nx, ny = grid.nx, grid.ny
    dx, dy = grid.dx, grid.dy
    fe_c, fe_f = _coriolis_faces(grid, params)
    K = lam_.shape[2:]

    px = np.zeros((nx + 2, ny) + K)
    px[1:-1] = lam_
    Fx_b = (px[:-1] - px[1:]) / dx
    py = np.zeros((nx, ny + 2) + K)
    py[:, 1:-1] = lam_
    Fy_b = (py[:, :-1] - py[:, 1:]) / dy
    if not grid.periodic:
        Fx_b[0] = Fx_b[-1] = 0.0
        Fy_b[:, 0] = Fy_b[:, -1] = 0.0

    gx_b = np.zeros((nx + 3, ny + 4) + K)
    gy_b = np.zeros((nx + 4, ny + 3) + K)
    gx_b[1 : nx + 2, 2 : ny + 2] += Fx_b
    t = 0.25 * fe_c * Fx_b
    gy_b[1 : nx + 2, 1 : ny + 1] += t
    gy_b[1 : nx + 2, 2 : ny + 2] += t
    gy_b[2 : nx + 3, 1 : ny + 1] += t
    gy_b[2 : nx + 3, 2 : ny + 2] += t
    gy_b[2 : nx + 2, 1 : ny + 2] += Fy_b
    t = -0.25 * fe_f * Fy_b
    gx_b[1 : nx + 1, 1 : ny + 2] += t
    gx_b[2 : nx + 2, 1 : ny + 2] += t
    gx_b[1 : nx + 1, 2 : ny + 3] += t
    gx_b[2 : nx + 2, 2 : ny + 3] += t

    g_b = np.zeros((nx + 4, ny + 4) + K)
    g_b[1:] += gx_b / dx
    g_b[:-1] -= gx_b / dx
    g_b[:, 1:] += gy_b / dy
    g_b[:, :-1] -= gy_b / dy
    return _ghost_adjoint(g_b, grid, params)


def _ghost_adjoint(g_b: np.ndarray, grid: Grid, params: PhysParams) -> np.ndarray:
    if grid.periodic:
        r = g_b[NG:-NG].copy()
        r[-NG:] += g_b[:NG]
        r[:NG] += g_b[-NG:]
        out = r[:, NG:-NG].copy()
        out[:, -NG:] += r[:, :NG]
        out[:, :NG] += r[:, -NG:]
        return out
    eps = params.epsilon
    dx, dy = grid.dx, grid.dy
    Dx = tangential_matrix(grid.nx, dx)
    Dy = tangential_matrix(grid.ny, dy)
    fe_c = (params.coriolis(grid.y) / eps)[:, None]
    fe_s = params.coriolis(0.0) / eps
    fe_n = params.coriolis(grid.Ly) / eps
    out = g_b[NG:-NG, NG:-NG].copy()
    w, e = g_b[1, NG:-NG], g_b[-2, NG:-NG]
    s, n = g_b[NG:-NG, 1], g_b[NG:-NG, -2]
    out[0] += w + np.tensordot(Dy.T, dx * fe_c * w, axes=(1, 0))
    out[-1] += e - np.tensordot(Dy.T, dx * fe_c * e, axes=(1, 0))
    out[:, 0] += s - np.tensordot(Dx.T, dy * fe_s * s, axes=(1, 0))
    out[:, -1] += n + np.tensordot(Dx.T, dy * fe_n * n, axes=(1, 0))
    return out


def lap_h(a: np.ndarray, grid: Grid) -> np.ndarray:
    """Horizontal 5-point Laplacian with zero wall flux (or periodic wrap)."""
    mode = "wrap" if grid.periodic else "edge"
    p = np.pad(a, ((1, 1), (1, 1)) + ((0, 0),) * (a.ndim - 2), mode=mode)
    return (p[2:, 1:-1] - 2 * a + p[:-2, 1:-1]) / grid.dx**2 + (
        p[1:-1, 2:] - 2 * a + p[1:-1, :-2]
    ) / grid.dy**2


def _face_grads(a: np.ndarray, grid: Grid):
    """Horizontal face gradients that enter the quadratic forms (walls excluded)."""
    if grid.periodic:
        gx = (np.roll(a, -1, axis=0) - a) / grid.dx
        gy = (np.roll(a, -1, axis=1) - a) / grid.dy
    else:
        gx = np.diff(a, axis=0) / grid.dx
        gy = np.diff(a, axis=1) / grid.dy
    return gx, gy


def _grad_dot(a, b, grid: Grid) -> np.ndarray:
    """Sum over faces of grad a . grad b, per trailing index."""
    ax, ay = _face_grads(a, grid)
    bx, by = _face_grads(b, grid)
    return (ax * bx).sum(axis=(0, 1)) + (ay * by).sum(axis=(0, 1))


# --------------------------------------------------------------------------
# public operations


def elliptic_core(T: ScalarField3, params: PhysParams) -> ScalarField3:
    """div(H^T grad T) on every level; requires filled ghosts."""
    g = T.require_ghosts()[:, :, NG:-NG]
    return ScalarField3(T.grid, core_from_ghosted(g, T.grid, params))


def flux_q(T: ScalarField3, params: PhysParams):
    """Horizontal flux q(T) on x-faces (nx+1, ny, nz) and y-faces (nx, ny+1, nz).

    Wall-face values are the boundary condition q . n = 0.
    """
    grid = T.grid
    g = T.require_ghosts()
    psi = core_from_ghosted(g[:, :, NG:-NG], grid, params)
    a = T.values
    tzz = dzz(a, grid, params)
    fe_c, fe_f = _coriolis_faces(grid, params)
    nx, ny = grid.nx, grid.ny

    def faces(u):
        if grid.periodic:
            p = np.pad(u, ((1, 1), (1, 1), (0, 0)), mode="wrap")
        else:
            p = np.pad(u, ((1, 1), (1, 1), (0, 0)), mode="edge")
        ux = (p[1:, 1:-1] - p[:-1, 1:-1]) / grid.dx  # (nx+1, ny)
        uy = (p[1:-1, 1:] - p[1:-1, :-1]) / grid.dy  # (nx, ny+1)
        return ux, uy

    px, py = faces(psi)
    tx, ty = faces(a)
    zx, zy = faces(tzz)
    # cross terms: f/eps times the 4-point average of the other component
    fpy = fe_f * py
    pad = np.pad(fpy, ((1, 1), (0, 0), (0, 0)), mode="wrap" if grid.periodic else "constant")
    cross_x = 0.25 * (pad[:-1, :-1] + pad[:-1, 1:] + pad[1:, :-1] + pad[1:, 1:])
    fpx = fe_c * px
    pad = np.pad(fpx, ((0, 0), (1, 1), (0, 0)), mode="wrap" if grid.periodic else "constant")
    cross_y = 0.25 * (pad[:-1, :-1] + pad[1:, :-1] + pad[:-1, 1:] + pad[1:, 1:])
    qx = params.lam * (px - cross_x) - params.K_h * tx + params.mu * zx
    qy = params.lam * (py + cross_y) - params.K_h * ty + params.mu * zy
    if grid.periodic:
        # the two wrap faces are the same face
        qx[0] = qx[-1]
        qy[:, 0] = qy[:, -1]
    else:
        qx[0] = qx[-1] = 0.0
        qy[:, 0] = qy[:, -1] = 0.0
    return qx, qy


def div_flux(qx, qy, grid: Grid) -> np.ndarray:
    return _div_faces(qx, qy, grid)


def apply_A(T: ScalarField3, params: PhysParams) -> ScalarField3:
    """Matrix-free  div q(T) - K_v T_zz  on interior cells; requires filled ghosts."""
    grid = T.grid
    _check_h(grid, params)
    g = T.require_ghosts()
    a = T.values
    out = -params.K_h * lap_h(a, grid) - params.K_v * dzz(a, grid, params)
    out += params.mu * lap_h(dzz(a, grid, params), grid)
    if params.lam != 0.0:
        psi = core_from_ghosted(g[:, :, NG:-NG], grid, params)
        out += params.lam * core_adjoint(psi, grid, params)
    return ScalarField3(grid, out)


def apply_A_array(a: np.ndarray, grid: Grid, params: PhysParams) -> np.ndarray:
    return apply_A(fill_ghosts(ScalarField3(grid, a), params), params).values


def bilinear_a(R1: ScalarField3, R2: ScalarField3, params: PhysParams) -> float:
    """Discrete a(R1, R2): surface terms plus volume terms.

    The surface trace uses the Robin face closure, so its coefficient is
    alpha / (1 + alpha dz / (2 K_v)); this includes the energy of the half
    cell between the top centre and z = 0.
    """
    grid = R1.grid
    if R2.grid != grid:
        raise GridMismatchError("fields live on different grids")
    a, b = R1.values, R2.values
    dA, dz, dV = grid.dA, grid.dz, grid.dV
    ae = alpha_eff(grid, params)
    top_a, top_b = a[:, :, -1], b[:, :, -1]
    surf = ae * (
        np.vdot(top_a, top_b) * dA
        + params.mu / params.K_v * _grad_dot(top_a[..., None], top_b[..., None], grid)[0] * dA
    )
    gh = _grad_dot(a, b, grid).sum() * dV
    za, zb = np.diff(a, axis=2) / dz, np.diff(b, axis=2) / dz
    gz = np.vdot(za, zb) * dV
    mixed = _grad_dot(za, zb, grid).sum() * dV
    vol = params.K_h * gh + params.K_v * gz + params.mu * mixed
    if params.lam != 0.0:
        ca = core_horizontal(a, grid, params)
        cb = ca if b is a else core_horizontal(b, grid, params)
        vol += params.lam * np.vdot(ca, cb) * dV
    return float(surf + vol)


def v2_norm_sq(R: ScalarField3, params: PhysParams) -> float:
    return bilinear_a(R, R, params)


def h1_norm_sq(R: ScalarField3) -> float:
    """|R|^2 + |grad R|^2 (3-D, interior faces)."""
    grid = R.grid
    a = R.values
    return float(
        (np.vdot(a, a) + _grad_dot(a, a, grid).sum() + np.sum(np.diff(a, axis=2) ** 2) / grid.dz**2)
        * grid.dV
    )


# --------------------------------------------------------------------------
# sparse assembly


def _colour_period(n: int, periodic: bool, width: int = 5) -> int:
    if not periodic:
        return min(width, n)
    for p in range(width, n + 1):
        if n % p == 0:
            return p
    return n


def core_matrix(grid: Grid, params: PhysParams) -> sp.csr_matrix:
    """Sparse 2-D elliptic core, recovered by coloured probing of the stencil."""
    nx, ny = grid.nx, grid.ny
    px, py = _colour_period(nx, grid.periodic), _colour_period(ny, grid.periodic)
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    probes = np.zeros((nx, ny, px * py))
    colours = [(a, b) for a in range(px) for b in range(py)]
    for c, (a, b) in enumerate(colours):
        probes[:, :, c] = ((I % px) == a) & ((J % py) == b)
    out = core_horizontal(probes, grid, params)
    rows, cols, vals = [], [], []
    for c, (a, b) in enumerate(colours):
        res = out[:, :, c]
        ii, jj = np.nonzero(res)
        # with fewer cells than the stencil width each colour is a single line
        si = np.full_like(ii, a) if px == nx else ii + ((a - ii + 2) % px) - 2
        sj = np.full_like(jj, b) if py == ny else jj + ((b - jj + 2) % py) - 2
        if grid.periodic:
            si %= nx
            sj %= ny
        ok = (si >= 0) & (si < nx) & (sj >= 0) & (sj < ny)
        if not np.all(ok):
            raise RuntimeError("probe attribution failed; stencil wider than expected")
        rows.append(ii * ny + jj)
        cols.append(si * ny + sj)
        vals.append(res[ii, jj])
    n = nx * ny
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def _second_diff_1d(n: int, d: float, periodic: bool) -> sp.csr_matrix:
    main = -2.0 * np.ones(n)
    off = np.ones(n - 1)
    M = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    if periodic:
        M[0, n - 1] = 1.0
        M[n - 1, 0] = 1.0
    else:
        M[0, 0] = -1.0
        M[n - 1, n - 1] = -1.0
    return (M / d**2).tocsr()


def vertical_matrix(grid: Grid, params: PhysParams) -> sp.csr_matrix:
    """1-D vertical second difference, Neumann bottom and Robin top."""
    nz, dz = grid.nz, grid.dz
    main = -2.0 * np.ones(nz)
    main[0] = -1.0
    main[-1] = -2.0 + robin_ratio(grid, params)
    off = np.ones(nz - 1)
    return (sp.diags([off, main, off], [-1, 0, 1]) / dz**2).tocsr()


def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    Dxx = _second_diff_1d(grid.nx, grid.dx, grid.periodic)
    Dyy = _second_diff_1d(grid.ny, grid.dy, grid.periodic)
    return (sp.kron(Dxx, sp.identity(grid.ny)) + sp.kron(sp.identity(grid.nx), Dyy)).tocsr()


@dataclass
class DiffusionOperator:
    """Assembled symmetric matrix of A acting on C-ordered interior unknowns."""

    grid: Grid
    params: PhysParams
    matrix: sp.csr_matrix
    asymmetry_before: float
    asymmetry_after: float
    surface_coefficient: float
    core: sp.csr_matrix = field(repr=False)
    lap: Optional[sp.csr_matrix] = field(default=None, repr=False)
    vertical: Optional[sp.csr_matrix] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def matvec(self, a: np.ndarray) -> np.ndarray:
        return (self.matrix @ a.reshape(-1)).reshape(self.grid.shape)

    def apply(self, T: ScalarField3) -> ScalarField3:
        return ScalarField3(self.grid, self.matvec(T.values))

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def export_triplets(self, path) -> None:
        """Write ``row col value`` lines (0-based), one per stored entry."""
        coo = self.matrix.tocoo()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")


def read_triplets(path) -> sp.csr_matrix:
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().lstrip("#").split()
        nr, nc, _ = (int(t) for t in head)
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix((nr, nc))
    return sp.csr_matrix(
        (data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(nr, nc)
    )


def relative_asymmetry(M: sp.spmatrix) -> float:
    D = (M - M.T).tocoo()
    scale = np.abs(M).max()
    if D.nnz == 0 or scale == 0:
        return 0.0
    return float(np.abs(D.data).max() / scale)


def assemble(grid: Grid, params: PhysParams, cap: int = DEFAULT_CAP) -> DiffusionOperator:
    """Build the sparse operator, then symmetrise and report the raw asymmetry."""
    _check_h(grid, params)
    if grid.size > cap:
        raise AssemblyTooLarge(
            f"{grid.size} unknowns exceeds the assembly cap of {cap}; "
            "coarsen the grid or raise the cap"
        )
    Iz = sp.identity(grid.nz, format="csr")
    Ih = sp.identity(grid.nx * grid.ny, format="csr")
    Lap = laplacian_matrix(grid)
    Z = vertical_matrix(grid, params)
    E = core_matrix(grid, params)
    A = (
        -params.K_h * sp.kron(Lap, Iz)
        + params.mu * sp.kron(Lap, Z)
        - params.K_v * sp.kron(Ih, Z)
    )
    if params.lam != 0.0:
        A = A + params.lam * sp.kron((E.T @ E), Iz)
    A = A.tocsr()
    A.sum_duplicates()
    before = relative_asymmetry(A)
    A = ((A + A.T) * 0.5).tocsr()
    after = relative_asymmetry(A)
    log.info("assembled %d unknowns, nnz=%d, asymmetry before/after %.2e/%.2e",
             A.shape[0], A.nnz, before, after)
    return DiffusionOperator(grid, params, A, before, after, alpha_eff(grid, params), E, Lap, Z)


# --------------------------------------------------------------------------
# surface-data helpers


def horizontal_divq(Ts: ScalarField2, params: PhysParams) -> np.ndarray:
    """div q(T*) for a depth-independent surface field (no vertical terms)."""
    grid = Ts.grid
    a = Ts.values[:, :, None]
    out = -params.K_h * lap_h(a, grid)
    if params.lam != 0.0:
        out = out + params.lam * core_adjoint(core_horizontal(a, grid, params), grid, params)
    return out[:, :, 0]


def tstar_compatibility(Ts: ScalarField2, params: PhysParams) -> float:
    """Relative residual of the oblique condition for T* at the lateral walls.

    Uses second-order one-sided normal and centred tangential differences, so
    smooth compatible data leave a truncation-size residual.
    """
    grid = Ts.grid
    if grid.periodic:
        return 0.0
    a = Ts.values
    dx, dy, eps = grid.dx, grid.dy, params.epsilon
    fy = params.coriolis(grid.y)
    fx_s, fx_n = params.coriolis(0.0), params.coriolis(grid.Ly)
    Dx = tangential_matrix(grid.nx, dx)
    Dy = tangential_matrix(grid.ny, dy)
    # T_x + (f/eps) T_y = 0 at x-walls;  T_y - (f/eps) T_x = 0 at y-walls
    tx_w = (-3 * a[0] + 4 * a[1] - a[2]) / (2 * dx)
    tx_e = (3 * a[-1] - 4 * a[-2] + a[-3]) / (2 * dx)
    ty_s = (-3 * a[:, 0] + 4 * a[:, 1] - a[:, 2]) / (2 * dy)
    ty_n = (3 * a[:, -1] - 4 * a[:, -2] + a[:, -3]) / (2 * dy)
    res = np.concatenate(
        [
            tx_w + fy / eps * (Dy @ a[0]),
            tx_e + fy / eps * (Dy @ a[-1]),
            ty_s - fx_s / eps * (Dx @ a[:, 0]),
            ty_n - fx_n / eps * (Dx @ a[:, -1]),
        ]
    )
    gx, gy = np.gradient(a, dx, dy)
    # a (near-)constant field has no gradient to compare against
    scale = max(np.abs(gx).max(), np.abs(gy).max(), np.abs(a).max() / min(grid.Lx, grid.Ly))
    if scale == 0.0:
        return 0.0
    return float(np.abs(res).max() * eps / scale)
