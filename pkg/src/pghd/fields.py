"""Grid, parameter and field containers plus the discrete integral primitives.

Arrays are stored with index order ``[i, j, k]`` (x, y, z).  Interior cell
centres sit at ``x_i = (i + 1/2) dx``, ``y_j = (j + 1/2) dy`` and
``z_k = -h + (k + 1/2) dz``.  Ghosted arrays carry two extra layers on every
face, so interior cell ``(i, j, k)`` lives at ``[i + 2, j + 2, k + 2]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

NG = 2  # ghost depth


class GridMismatchError(ValueError):
    pass


class GhostError(RuntimeError):
    """Raised when a stencil is applied to a field whose ghosts are not filled."""


class LateralMode(str, Enum):
    PHYSICAL = "physical"
    PERIODIC_TEST = "periodic_test"


@dataclass(frozen=True)
class PhysParams:
    """Dimensionless model coefficients.

    ``lam`` is the hyper-diffusion coefficient (``lambda`` is reserved).
    """

    epsilon: float = 0.1
    f0: float = 1.0
    beta: float = 0.5
    K_v: float = 1e-2
    K_h: float = 1e-2
    lam: float = 1e-4
    mu: float = 1e-3
    alpha: float = 0.1
    h: float = 1.0

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ValueError("; ".join(errors))

    def validate(self, allow_zero_lam: bool = True) -> list[str]:
        errs = []
        for name in ("epsilon", "K_v", "K_h", "mu", "h"):
            if not getattr(self, name) > 0:
                errs.append(f"{name} must be > 0 (got {getattr(self, name)})")
        if not self.lam >= 0:
            errs.append(f"lambda must be >= 0 (got {self.lam})")
        if not self.alpha >= 0:
            errs.append(f"alpha must be >= 0 (got {self.alpha})")
        for name in ("f0", "beta"):
            if not np.isfinite(getattr(self, name)):
                errs.append(f"{name} must be finite")
        return errs

    def coriolis(self, y):
        return self.f0 + self.beta * np.asarray(y, dtype=float)

    def gamma(self, y):
        """(f^2 + eps^2)^-1."""
        f = self.coriolis(y)
        return 1.0 / (f * f + self.epsilon**2)

    def replace(self, **kw) -> "PhysParams":
        d = dict(self.__dict__)
        d.update(kw)
        return PhysParams(**d)


def coriolis_at(params: PhysParams, y) -> float:
    return params.f0 + params.beta * y


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    nz: int
    Lx: float = 1.0
    Ly: float = 1.0
    h: float = 1.0
    lateral_mode: LateralMode = LateralMode.PHYSICAL

    def __post_init__(self):
        object.__setattr__(self, "lateral_mode", LateralMode(self.lateral_mode))
        for n in ("nx", "ny", "nz"):
            if int(getattr(self, n)) < 4:
                raise ValueError(f"{n} must be >= 4")
        for n in ("Lx", "Ly", "h"):
            if not getattr(self, n) > 0:
                raise ValueError(f"{n} must be > 0")

    @property
    def periodic(self) -> bool:
        return self.lateral_mode is LateralMode.PERIODIC_TEST

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dy(self) -> float:
        return self.Ly / self.ny

    @property
    def dz(self) -> float:
        return self.h / self.nz

    @property
    def dA(self) -> float:
        return self.dx * self.dy

    @property
    def dV(self) -> float:
        return self.dx * self.dy * self.dz

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def size(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def volume(self) -> float:
        return self.Lx * self.Ly * self.h

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dy

    @property
    def z(self) -> np.ndarray:
        return -self.h + (np.arange(self.nz) + 0.5) * self.dz

    @property
    def z_faces(self) -> np.ndarray:
        return -self.h + np.arange(self.nz + 1) * self.dz

    def mesh(self):
        return np.meshgrid(self.x, self.y, self.z, indexing="ij")

    def mesh2(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def same_as(self, other: "Grid") -> bool:
        return self == other


@dataclass
class ScalarField3:
    """Cell-centred 3-D scalar.  ``ghosted`` is set only by an explicit ghost fill."""

    grid: Grid
    values: np.ndarray
    ghosted: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridMismatchError(
                f"values shape {self.values.shape} != grid shape {self.grid.shape}"
            )

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField3":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "ScalarField3":
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField3":
        X, Y, Z = grid.mesh()
        return cls(grid, np.broadcast_to(fn(X, Y, Z), grid.shape).astype(float))

    @property
    def has_ghosts(self) -> bool:
        return self.ghosted is not None

    def require_ghosts(self) -> np.ndarray:
        if self.ghosted is None:
            raise GhostError("ghost cells not filled; call fill_ghosts first")
        return self.ghosted

    def __add__(self, other):
        _check_same(self, other)
        return ScalarField3(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_same(self, other)
        return ScalarField3(self.grid, self.values - other.values)

    def __mul__(self, c: float):
        return ScalarField3(self.grid, self.values * c)

    __rmul__ = __mul__


@dataclass
class ScalarField2:
    """Field on the horizontal cross-section M (e.g. the surface profile T*)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.nx, self.grid.ny):
            raise GridMismatchError(
                f"values shape {self.values.shape} != {(self.grid.nx, self.grid.ny)}"
            )

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField2":
        return cls(grid, np.zeros((grid.nx, grid.ny)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField2":
        X, Y = grid.mesh2()
        return cls(grid, np.broadcast_to(fn(X, Y), (grid.nx, grid.ny)).astype(float))

    def extrude(self) -> ScalarField3:
        v = np.repeat(self.values[:, :, None], self.grid.nz, axis=2)
        return ScalarField3(self.grid, v)


@dataclass
class VelocityField:
    """v1, v2 at cell centres; w on z-interfaces (shape nz + 1, index 0 is z = -h)."""

    grid: Grid
    v1: np.ndarray
    v2: np.ndarray
    w: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.v1.shape != self.grid.shape or self.v2.shape != self.grid.shape:
            raise GridMismatchError("velocity components do not match grid")
        if self.w is not None and self.w.shape != (
            self.grid.nx,
            self.grid.ny,
            self.grid.nz + 1,
        ):
            raise GridMismatchError("w must live on the nz + 1 z-interfaces")

    @classmethod
    def zeros(cls, grid: Grid) -> "VelocityField":
        z = np.zeros(grid.shape)
        return cls(grid, z, z.copy(), np.zeros(grid.shape[:2] + (grid.nz + 1,)))

    def max_abs(self) -> float:
        m = max(np.abs(self.v1).max(), np.abs(self.v2).max())
        if self.w is not None:
            m = max(m, np.abs(self.w).max())
        return float(m)


def _check_same(a, b):
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")


def inner_l2(a: ScalarField3, b: ScalarField3) -> float:
    """Midpoint-rule approximation of the integral of a*b over the box."""
    _check_same(a, b)
    return float(np.vdot(a.values, b.values) * a.grid.dV)


def norm_l2(a: ScalarField3) -> float:
    return float(np.sqrt(inner_l2(a, a)))


def inner_l2_surface(a: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    return float(np.vdot(a, b) * grid.dA)


def depth_integral(field, grid: Optional[Grid] = None, at: str = "centers") -> np.ndarray:
    """Cumulative midpoint integral from z = -h.

    ``at="centers"`` returns the integral up to each cell centre (nz values per
    column); ``at="interfaces"`` returns it at the nz + 1 z-interfaces, the last
    one being the full-column integral.
    """
    if isinstance(field, ScalarField3):
        grid = field.grid
        vals = field.values
    else:
        vals = np.asarray(field, dtype=float)
        if grid is None:
            raise ValueError("grid required for raw arrays")
    dz = grid.dz
    csum = np.cumsum(vals, axis=-1) * dz
    if at == "interfaces":
        out = np.zeros(vals.shape[:-1] + (vals.shape[-1] + 1,))
        out[..., 1:] = csum
        return out
    if at == "centers":
        return csum - 0.5 * dz * vals
    raise ValueError(f"unknown location {at!r}")


def column_mean(vals: np.ndarray, grid: Grid) -> np.ndarray:
    """Depth average over each column."""
    return vals.sum(axis=-1) * grid.dz / grid.h
