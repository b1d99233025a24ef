"""Lowest eigenpairs of the diffusion operator and the modal Galerkin solver.

The assembled operator has Kronecker structure

    A = B (x) I + C (x) Z - K_v I (x) Z,   B = lam E^T E - K_h Lap,  C = mu Lap,

with ``Z`` the 1-D vertical second difference.  Diagonalising ``Z = V diag(z) V^T``
splits ``A`` exactly into ``nz`` horizontal blocks ``B + z_k C - K_v z_k I``,
each solved on its own.  Every lifted eigenvector is checked against the full
assembled matrix.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .advection import advect_tendency, surface_advection
from .diffusion import DiffusionOperator
from .fields import Grid, PhysParams, ScalarField2, ScalarField3
from .ghosts import fill_ghosts
from .snapshot import write_snapshot
from .stepper import Scheme, Source, _as_array
from .velocity import diagnose

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8
ROUNDING_FACTOR = 64
DENSE_LIMIT = 2500


class EigenSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class EigenBasis:
    """``Phi[k]`` is the k-th eigenfield (grid shape), L2-orthonormal."""

    grid: Grid
    eigenvalues: np.ndarray
    Phi: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.eigenvalues)

    def field(self, k: int) -> ScalarField3:
        return ScalarField3(self.grid, self.Phi[k].copy())

    def gram(self) -> np.ndarray:
        P = self.Phi.reshape(self.m, -1)
        return (P @ P.T) * self.grid.dV


def _lowest_dense(M, k: int):
    M = M.toarray() if sp.issparse(M) else np.asarray(M)
    w, v = sla.eigh(M, subset_by_index=[0, k - 1])
    return w, v


def _lowest_sparse(M: sp.csr_matrix, k: int, shift: float):
    n = M.shape[0]
    if n <= DENSE_LIMIT or k >= n - 1:
        return _lowest_dense(M, min(k, n))
    try:
        w, v = eigsh(M.tocsc(), k=k, sigma=shift, which="LM", tol=1e-13)
    except ArpackNoConvergence as exc:
        raise EigenSolverError(f"eigensolver did not converge: {exc}") from exc
    order = np.argsort(w)
    return w[order], v[:, order]


def _horizontal_parts(op: DiffusionOperator):
    p = op.params
    Lap = op.lap
    B = -p.K_h * Lap
    if p.lam != 0.0:
        B = B + p.lam * (op.core.T @ op.core)
    B = ((B + B.T) * 0.5).tocsr()
    C = (p.mu * Lap).tocsr()
    return B, C


def _block_solve(op: DiffusionOperator, m: int):
    """Merge the lowest eigenpairs of every vertical block."""
    grid, p = op.grid, op.params
    nh = grid.nx * grid.ny
    Z = op.vertical.toarray()
    zeta, V = np.linalg.eigh((Z + Z.T) * 0.5)
    order = np.argsort(-zeta)  # least negative first = smallest vertical penalty
    zeta, V = zeta[order], V[:, order]
    B, C = _horizontal_parts(op)
    Ih = sp.identity(nh, format="csr")
    scale = abs(B).max() + abs(C).max() * abs(zeta).max() + p.K_v * abs(zeta).max()
    bmin = None
    vals, vecs = [], []
    for k, z in enumerate(zeta):
        # blocks are ordered by the vertical penalty -K_v z_k, a lower bound on
        # their spectrum shift (C z_k is positive semidefinite)
        if bmin is not None and len(vals) >= m:
            bound = bmin - p.K_v * z
            if bound > np.sort(vals)[m - 1]:
                break
        M = (B + z * C - p.K_v * z * Ih).tocsr()
        w, u = _lowest_sparse(M, min(m, nh), -1e-6 * scale)
        if bmin is None:
            bmin = w[0]
        vals.extend(w)
        vecs.extend((u[:, j], k) for j in range(u.shape[1]))
    order = np.argsort(vals, kind="stable")[:m]
    w = np.asarray(vals)[order]
    X = np.empty((grid.size, m))
    for col, idx in enumerate(order):
        u, k = vecs[idx]
        X[:, col] = np.kron(u, V[:, k])
    return w, X


def compute_basis(op: DiffusionOperator, m: int) -> EigenBasis:
    """Lowest ``m`` eigenpairs of the assembled operator."""
    grid = op.grid
    n = op.n
    if not 1 <= m <= n:
        raise ValueError(f"m must lie in [1, {n}] (got {m})")
    if n <= DENSE_LIMIT or op.lap is None or op.vertical is None:
        w, X = _lowest_dense(op.matrix, m) if n <= DENSE_LIMIT else _lowest_sparse(
            op.matrix, m, -1e-6 * abs(op.matrix).max())
    else:
        w, X = _block_solve(op, m)
    R = op.matrix @ X - X * w
    res = np.linalg.norm(R, axis=0)
    # the kernel (lambda = 0) is checked against the top of the computed range
    ref = np.maximum(np.abs(w), np.abs(w).max())
    ref = np.where(np.abs(w) > 1e-10 * np.abs(w).max(), np.abs(w), ref)
    # small eigenvalues of a stiff operator cannot beat rounding in A itself
    floor = ROUNDING_FACTOR * np.finfo(float).eps * float(abs(op.matrix).sum(axis=1).max())
    allowed = RESIDUAL_TOL * ref + floor
    bad = res > allowed
    if np.any(bad):
        k = int(np.argmax(bad))
        raise EigenSolverError(
            f"eigenpair {k + 1} residual {res[k]:.2e} exceeds the allowance {allowed[k]:.2e}"
        )
    Phi = (X.T / np.sqrt(grid.dV)).reshape((m,) + grid.shape)
    log.info("computed %d eigenpairs, max residual %.2e", m, res.max())
    return EigenBasis(grid, w, Phi, res)


def weyl_growth_check(basis: EigenBasis) -> float:
    """min_k (lambda_k / lambda_1) / k: an empirical lower growth constant."""
    if basis.m < 10:
        raise ValueError(f"need at least 10 modes (got {basis.m})")
    lam = basis.eigenvalues
    if not lam[0] > 0:
        raise ValueError("growth ratio needs a strictly positive spectrum")
    k = np.arange(1, basis.m + 1)
    return float(np.min(lam / lam[0] / k))


def project(basis: EigenBasis, T) -> np.ndarray:
    vals = T.values if isinstance(T, ScalarField3) else np.asarray(T)
    P = basis.Phi.reshape(basis.m, -1)
    return (P @ vals.reshape(-1)) * basis.grid.dV


def reconstruct(basis: EigenBasis, coeffs: np.ndarray) -> ScalarField3:
    P = basis.Phi.reshape(basis.m, -1)
    return ScalarField3(basis.grid, (np.asarray(coeffs) @ P).reshape(basis.grid.shape))


def export_basis(basis: EigenBasis, directory) -> Path:
    """One PGHD1 file per mode plus ``manifest.txt`` with ``k lambda residual``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(basis.m)))
    with open(out / "manifest.txt", "w", encoding="utf-8") as fh:
        fh.write("# k lambda residual\n")
        for k in range(basis.m):
            write_snapshot(basis.field(k), out / f"mode_{k + 1:0{width}d}.pghd")
            fh.write(f"{k + 1} {float(basis.eigenvalues[k])!r} {float(basis.residuals[k])!r}\n")
    return out


# --------------------------------------------------------------------------
# modal time stepping


@dataclass
class GalerkinState:
    coeffs: np.ndarray
    t: float = 0.0
    step_index: int = 0
    prev_explicit: Optional[np.ndarray] = field(default=None, repr=False)


def galerkin_tendency(coeffs: np.ndarray, basis: EigenBasis, params: PhysParams,
                      Tstar: Optional[ScalarField2], Qstar: Source, t: float,
                      advection: bool = True) -> np.ndarray:
    """Projected explicit forcing: <Q*, phi_k> minus the projected transport."""
    grid = basis.grid
    rhs = _as_array(Qstar, grid, t).copy()
    if advection:
        T = fill_ghosts(reconstruct(basis, coeffs), params)
        vel = diagnose(T, Tstar, params)
        rhs += advect_tendency(T, vel).values
        if Tstar is not None:
            rhs -= surface_advection(vel, Tstar, params)
    return project(basis, rhs)


def galerkin_step(state, basis: EigenBasis, params: PhysParams, dt: float,
                  Tstar: Optional[ScalarField2] = None, Qstar: Source = None,
                  advection: bool = True,
                  scheme: Scheme = Scheme.BACKWARD_EULER_AB2) -> GalerkinState:
    """Advance the modal system by ``dt`` (eigenvalue term implicit, the rest AB2)."""
    if not isinstance(state, GalerkinState):
        state = GalerkinState(np.asarray(state, dtype=float))
    theta = 1.0 if Scheme(scheme) is Scheme.BACKWARD_EULER_AB2 else 0.5
    a = state.coeffs
    lam = basis.eigenvalues
    E = galerkin_tendency(a, basis, params, Tstar, Qstar, state.t, advection)
    Ex = E if state.prev_explicit is None else 1.5 * E - 0.5 * state.prev_explicit
    new = (a * (1.0 - (1.0 - theta) * dt * lam) + dt * Ex) / (1.0 + theta * dt * lam)
    return GalerkinState(new, state.t + dt, state.step_index + 1, E)


def galerkin_advective_energy(coeffs: np.ndarray, basis: EigenBasis, params: PhysParams) -> float:
    """Transport contribution to d/dt (sum a_k^2)/2 for T* = 0."""
    T = fill_ghosts(reconstruct(basis, coeffs), params)
    vel = diagnose(T, None, params)
    proj = project(basis, advect_tendency(T, vel).values)
    return float(coeffs @ proj)
