"""Energy monitors and long-time-behaviour estimates.

The closed-form bounds take their abstract constants (C0, C2, C) as inputs.
``calibrate_C0`` turns a measured unforced decay rate into C0 so that the
absorbing-ball radius becomes a checkable number.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .advection import advection_energy
from .diffusion import v2_norm_sq
from .fields import Grid, PhysParams, ScalarField2, ScalarField3, VelocityField
from .ghosts import alpha_eff, fill_ghosts
from .stepper import SimState, Source, _as_array
from .velocity import diagnose

CSV_COLUMNS = ("t", "l2_sq", "v2_sq", "surface_l2", "adv_energy", "source_power", "bl_grad")


@dataclass(frozen=True)
class EnergyReport:
    t: float
    l2_sq: float
    v2_sq: float
    surface_l2: float
    advective_energy: float
    source_power: float
    bl_grad: float = float("nan")

    def row(self) -> tuple:
        return (self.t, self.l2_sq, self.v2_sq, self.surface_l2,
                self.advective_energy, self.source_power, self.bl_grad)


@dataclass(frozen=True)
class BallEstimate:
    C0: float
    C2: float
    R_tilde_a: float
    R_a: float
    tstar_h1_sq: float = 0.0
    q_sq: float = 0.0


class DecayFit(NamedTuple):
    rate: float
    monotone: bool
    flagged: bool


@dataclass
class Trajectory:
    """Stored L2-comparable states of one run plus what identifies its setup."""

    times: list = field(default_factory=list)
    fields: list = field(default_factory=list)
    signature: object = None

    def append(self, t: float, values: np.ndarray) -> None:
        self.times.append(float(t))
        self.fields.append(np.array(values, dtype=float))


class DependenceSeries(NamedTuple):
    t: np.ndarray
    ratio: np.ndarray
    coincident: bool


def _values(state) -> tuple[ScalarField3, float]:
    if isinstance(state, SimState):
        return state.Ttilde, state.t
    if isinstance(state, ScalarField3):
        return state, 0.0
    raise TypeError(f"expected SimState or ScalarField3, got {type(state).__name__}")


def energy_report(state, params: PhysParams, grid: Optional[Grid] = None,
                  vel: Optional[VelocityField] = None, Qstar: Source = None,
                  Tstar: Optional[ScalarField2] = None, bl_width: Optional[int] = None) -> EnergyReport:
    """Evaluate every energy functional on the current state.

    ``surface_l2`` uses the coefficient the discrete Robin closure applies, so
    that it is exactly the surface part of ``v2_sq``.
    """
    T, t = _values(state)
    grid = grid or T.grid
    a = T.values
    l2 = float(np.vdot(a, a) * grid.dV)
    v2 = v2_norm_sq(T, params)
    surf = float(alpha_eff(grid, params) * np.sum(a[:, :, -1] ** 2) * grid.dA)
    Tg = T if T.has_ghosts else fill_ghosts(T, params)
    if vel is None:
        vel = diagnose(Tg, Tstar, params)
    adv = advection_energy(Tg, vel) if not np.allclose(a, 0) else 0.0
    q = _as_array(Qstar, grid, t)
    power = float(np.vdot(q, a) * grid.dV)
    bl = float("nan")
    if bl_width is not None and not grid.periodic:
        bl = boundary_layer_monitor(T, grid, bl_width)
    return EnergyReport(t, l2, v2, surf, adv, power, bl)


def decay_rate(series) -> DecayFit:
    """Least-squares slope of log(l2_sq) against t over the second half."""
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 10:
        raise ValueError("need at least 10 (t, l2_sq) samples")
    t, e = arr[:, 0], arr[:, 1]
    if np.any(e <= 0):
        raise ValueError("l2_sq must be positive to take logarithms")
    half = arr.shape[0] // 2
    slope = float(np.polyfit(t[half:], np.log(e[half:]), 1)[0])
    monotone = bool(np.all(np.diff(e) < 0))
    if abs(slope) < 1e-14:
        slope = 0.0
    return DecayFit(slope, monotone, not monotone)


def calibrate_C0(rate: float) -> float:
    """C0 such that exp(-t / (2 C0)) matches the measured energy decay."""
    if not rate < 0:
        raise ValueError("calibration needs a negative decay rate")
    return -1.0 / (2.0 * rate)


def energy_inequality_residual(r0: EnergyReport, r1: EnergyReport, dt: float) -> float:
    """(|T|^2 growth)/dt + ||T||^2 - 2 <Q*, T>, evaluated at the new level."""
    return (r1.l2_sq - r0.l2_sq) / dt + r1.v2_sq - 2.0 * r1.source_power


def surface_h1_sq(Tstar: Optional[ScalarField2]) -> float:
    if Tstar is None:
        return 0.0
    g = Tstar.grid
    a = Tstar.values
    gx, gy = np.gradient(a, g.dx, g.dy, edge_order=2)
    return float(np.sum(a * a + gx * gx + gy * gy) * g.dA)


def surface_l2_sq(Tstar: Optional[ScalarField2]) -> float:
    if Tstar is None:
        return 0.0
    return float(np.sum(Tstar.values**2) * Tstar.grid.dA)


def _volume_sq(Q, grid: Optional[Grid]) -> float:
    if Q is None:
        return 0.0
    if isinstance(Q, ScalarField3):
        return float(np.vdot(Q.values, Q.values) * Q.grid.dV)
    if grid is None:
        raise ValueError("grid required for a raw source array")
    q = np.broadcast_to(np.asarray(Q, dtype=float), grid.shape)
    return float(np.sum(q * q) * grid.dV)


def absorbing_radius(params: PhysParams, Tstar: Optional[ScalarField2], Q, C0: float, C2: float,
                     grid: Optional[Grid] = None, q_sq: Optional[float] = None) -> BallEstimate:
    """Radii of the absorbing ball for the anomaly (R_tilde_a) and full temperature (R_a).

    ``q_sq`` overrides the computed |Q|^2 when given.
    """
    if not (C0 > 0 and C2 > 0):
        raise ValueError("C0 and C2 must be positive")
    h1 = surface_h1_sq(Tstar)
    qq = _volume_sq(Q, grid) if q_sq is None else float(q_sq)
    rt = 4.0 * C0 * C2 * params.alpha**2 * (1.0 + params.mu / params.K_v) ** 2 * h1 + 8.0 * C0**2 * qq
    ra = 2.0 * rt + 2.0 * surface_l2_sq(Tstar)
    return BallEstimate(C0, C2, rt, ra, h1, qq)


def attractor_dim_bound(R_a: float, lambda1: float, C: float,
                        tstar_h1_sq: float = 0.0, q_sq: float = 0.0) -> float:
    """C (K4 / lambda1)^(1/2) with K4 = C R_a^6 (1 + ||T*||_H1^2 + |Q|^2)."""
    if not lambda1 > 0:
        raise ValueError("lambda1 must be positive")
    if not C > 0:
        raise ValueError("C must be positive")
    k4 = C * R_a**6 * (1.0 + tstar_h1_sq + q_sq)
    return float(C * np.sqrt(k4 / lambda1))


def continuous_dependence_ratio(run_a: Trajectory, run_b: Trajectory, dV: float = 1.0) -> DependenceSeries:
    """|chi(t)| / |chi(0)| with chi the difference of two runs."""
    if run_a.signature != run_b.signature:
        raise ValueError("runs were produced with different configurations")
    if len(run_a.times) != len(run_b.times) or not np.allclose(run_a.times, run_b.times):
        raise ValueError("runs are sampled at different times")
    t = np.asarray(run_a.times)
    norms = np.array([np.sqrt(np.sum((a - b) ** 2) * dV) for a, b in zip(run_a.fields, run_b.fields)])
    if norms[0] == 0.0:
        return DependenceSeries(t, np.zeros_like(norms), True)
    return DependenceSeries(t, norms / norms[0], False)


def fit_growth_exponent(series: DependenceSeries) -> float:
    """Smallest C with ratio(t) <= exp(C t) for every sample."""
    t, r = series.t, series.ratio
    mask = t > t[0]
    if series.coincident or not np.any(mask):
        return 0.0
    with np.errstate(divide="ignore"):
        return float(np.max(np.log(r[mask]) / (t[mask] - t[0])))


def boundary_layer_monitor(state, grid: Optional[Grid] = None, width_cells: int = 2) -> float:
    """max |grad_h T| over cells within ``width_cells`` of a lateral wall."""
    T, _ = _values(state)
    grid = grid or T.grid
    if grid.periodic:
        raise ValueError("boundary-layer monitor needs lateral walls (physical mode)")
    if width_cells < 1:
        raise ValueError("width_cells must be >= 1")
    a = T.values
    gx, gy = np.gradient(a, grid.dx, grid.dy, axis=(0, 1), edge_order=2)
    mag = np.sqrt(gx * gx + gy * gy)
    w = min(width_cells, grid.nx // 2, grid.ny // 2)
    band = np.zeros(mag.shape[:2], dtype=bool)
    band[:w] = band[-w:] = True
    band[:, :w] = band[:, -w:] = True
    vals = mag[band]
    if not np.all(np.isfinite(vals)):
        return float("inf")
    return float(vals.max())


def report_series(reports: Sequence[EnergyReport]) -> np.ndarray:
    return np.array([(r.t, r.l2_sq) for r in reports])
