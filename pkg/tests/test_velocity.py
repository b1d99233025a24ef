import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from pghd.fields import Grid, LateralMode, PhysParams, ScalarField2, ScalarField3, VelocityField, column_mean
from pghd.ghosts import fill_ghosts
from pghd.mms import default_params, manufactured_fields
from pghd.velocity import (
    continuity_residual,
    diagnose,
    diagnose_v,
    diagnose_w,
    reconstruct_pressure,
)

PER = LateralMode.PERIODIC_TEST


def ghosted(grid, params, values):
    return fill_ghosts(ScalarField3(grid, values), params)


def gyre(grid):
    return ScalarField2.from_function(grid, lambda X, Y: np.cos(np.pi * Y / grid.Ly))


def test_zero_temperature_gives_rest(small_grid, params):
    vel = diagnose(ghosted(small_grid, params, np.zeros(small_grid.shape)), None, params)
    assert vel.max_abs() == 0.0


def test_depth_profile_and_constant_surface_give_rest(small_grid, params):
    T = ghosted(small_grid, params, np.broadcast_to(np.sin(3 * small_grid.z), small_grid.shape).copy())
    Ts = ScalarField2(small_grid, np.full((small_grid.nx, small_grid.ny), 2.0))
    vel = diagnose(T, Ts, params)
    assert vel.max_abs() < 1e-12


@pytest.mark.parametrize("mode", list(LateralMode))
def test_depth_mean_vanishes_and_continuity_is_exact(mode, rng):
    g = Grid(12, 10, 8, lateral_mode=mode)
    p = PhysParams() if mode is LateralMode.PHYSICAL else PhysParams(alpha=0.0, beta=0.0)
    Ts = None if g.periodic else gyre(g)
    for _ in range(5):
        vel = diagnose(ghosted(g, p, rng.standard_normal(g.shape)), Ts, p)
        scale = max(np.abs(vel.v1).max(), np.abs(vel.v2).max())
        assert np.abs(column_mean(vel.v1, g)).max() <= 1e-12 * scale
        assert np.abs(column_mean(vel.v2, g)).max() <= 1e-12 * scale
        div_scale = scale * (1 / g.dx + 1 / g.dy)
        assert np.abs(continuity_residual(vel)).max() <= 1e-12 * div_scale
        assert np.all(vel.w[..., 0] == 0.0)
        assert np.abs(vel.w[..., -1]).max() <= 1e-12 * div_scale * g.h


def test_diagnose_w_of_rest_and_of_a_divergence_free_shear():
    g = Grid(8, 8, 4, lateral_mode=PER)
    z = np.zeros(g.shape)
    assert np.all(diagnose_w(VelocityField(g, z, z.copy())).w == 0.0)
    X, Y, Z = g.mesh()
    v1 = np.broadcast_to(np.sin(2 * np.pi * Y), g.shape).copy()
    assert np.abs(diagnose_w(VelocityField(g, v1, z.copy())).w).max() < 1e-13


def test_shear_sign_for_a_linear_temperature():
    # dv/dz = gamma (eps T_x + f T_y, -f T_x + eps T_y); check with T = x, then T = y
    g = Grid(8, 8, 4, lateral_mode=PER)
    p = PhysParams(epsilon=0.2, f0=1.0, beta=0.0, alpha=0.0)
    gam = 1 / (p.f0**2 + p.epsilon**2)
    X, Y, Z = g.mesh()
    for vals, expect in ((X, (p.epsilon, -p.f0)), (Y, (p.f0, p.epsilon))):
        # periodic differences of a ramp are exact away from the wrap
        vel = diagnose_v(ghosted(g, p, np.broadcast_to(vals, g.shape).copy()), None, p)
        dv1 = np.diff(vel.v1, axis=2)[2:-2, 2:-2] / g.dz
        dv2 = np.diff(vel.v2, axis=2)[2:-2, 2:-2] / g.dz
        assert np.allclose(dv1, gam * expect[0])
        assert np.allclose(dv2, gam * expect[1])


def _smooth(X, Y, Z):
    return np.cos(2 * np.pi * X) * np.cos(3 * np.pi * Y) * np.cos(np.pi * (Z + 1)) + 0.5 * np.sin(
        np.pi * X) * np.cos(2 * np.pi * (Z + 1))


def test_shear_matches_closed_form_to_second_order():
    p = PhysParams(epsilon=0.3, f0=1.0, beta=0.8)
    errs = []
    for n in (32, 64):
        g = Grid(n, n, n // 2)
        X, Y, Z = g.mesh()
        vel = diagnose_v(ghosted(g, p, _smooth(X, Y, Z)), None, p)
        zf = g.z_faces[1:-1]
        Xf, Yf, Zf = np.meshgrid(g.x, g.y, zf, indexing="ij")
        d = 1e-6
        Tx = (_smooth(Xf + d, Yf, Zf) - _smooth(Xf - d, Yf, Zf)) / (2 * d)
        Ty = (_smooth(Xf, Yf + d, Zf) - _smooth(Xf, Yf - d, Zf)) / (2 * d)
        f = p.coriolis(Yf)
        gam = 1 / (f**2 + p.epsilon**2)
        s = slice(3, -3)
        e1 = np.abs(np.diff(vel.v1, axis=2) / g.dz - gam * (p.epsilon * Tx + f * Ty))[s, s].max()
        e2 = np.abs(np.diff(vel.v2, axis=2) / g.dz - gam * (-f * Tx + p.epsilon * Ty))[s, s].max()
        errs.append(max(e1, e2))
    assert errs[0] / errs[1] > 3.6


def _wn_oracle(p, C, Cx, Cy, Clap, Zf, y, z, h=1.0):
    """Vertical velocity from the explicit double-integral formula, by quadrature.

    For T = C(x, y) Z(z) the column integrals separate:
    w = -D(x, y) [I2(z) - (z + h) I2(0) / h],  I1 = int Z,  I2 = int I1.
    """
    f = p.f0 + p.beta * y
    e2f2 = p.epsilon**2 + f**2
    D = (p.epsilon * Clap - p.beta * Cx) / e2f2 - 2 * p.beta * f * (-f * Cx + p.epsilon * Cy) / e2f2**2
    I1 = lambda s: quad(Zf, -h, s, epsabs=1e-13)[0]  # noqa: E731
    I2 = lambda s: quad(I1, -h, s, epsabs=1e-13)[0]  # noqa: E731
    return -D * (I2(z) - (z + h) * I2(0.0) / h)


def test_w_matches_explicit_double_integral_formula():
    p = PhysParams(epsilon=0.3, f0=1.0, beta=0.8)
    kx, ky = 2 * np.pi, np.pi

    def Zf(s):
        return np.cos(np.pi * (s + 1)) + 0.3 * np.cos(2 * np.pi * (s + 1)) + 0.2

    errs = []
    for n in (16, 32):
        g = Grid(n, n, n // 2)
        X, Y, Z = g.mesh()
        vals = np.cos(kx * X) * np.cos(ky * Y) * Zf(Z)
        vel = diagnose(ghosted(g, p, vals), None, p)
        worst = 0.0
        # sample interior columns and levels away from the walls
        for i, j in ((n // 2, n // 2), (n // 4 + 1, 3 * n // 4 - 1), (n // 3, n // 2 + 2)):
            xc, yc = g.x[i], g.y[j]
            C = np.cos(kx * xc) * np.cos(ky * yc)
            Cx = -kx * np.sin(kx * xc) * np.cos(ky * yc)
            Cy = -ky * np.cos(kx * xc) * np.sin(ky * yc)
            Clap = -(kx**2 + ky**2) * C
            for k in (g.nz // 4, g.nz // 2, 3 * g.nz // 4):
                oracle = _wn_oracle(p, C, Cx, Cy, Clap, Zf, yc, g.z_faces[k])
                worst = max(worst, abs(vel.w[i, j, k] - oracle))
        errs.append(worst)
    assert errs[1] < 0.05
    assert errs[0] / errs[1] > 3.0


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31 - 1))
def test_velocity_is_linear_in_temperature_and_surface_data(a, b, seed):
    g = Grid(6, 5, 4)
    p = PhysParams()
    r = np.random.default_rng(seed)
    T1, T2 = r.standard_normal(g.shape), r.standard_normal(g.shape)
    S1, S2 = (ScalarField2(g, r.standard_normal((6, 5))) for _ in range(2))
    combo = diagnose(ghosted(g, p, a * T1 + b * T2), ScalarField2(g, a * S1.values + b * S2.values), p)
    v1 = diagnose(ghosted(g, p, T1), S1, p)
    v2 = diagnose(ghosted(g, p, T2), S2, p)
    tol = 1e-12 * (1 + abs(a) + abs(b)) * max(v1.max_abs(), v2.max_abs(), 1.0)
    for name in ("v1", "v2", "w"):
        lhs = getattr(combo, name)
        rhs = a * getattr(v1, name) + b * getattr(v2, name)
        assert np.abs(lhs - rhs).max() <= tol


def test_pressure_of_rest_and_of_uniform_temperature():
    g = Grid(4, 4, 8)
    p = PhysParams()
    assert np.all(reconstruct_pressure(ScalarField3.zeros(g), None, p).values == 0.0)
    pr = reconstruct_pressure(ScalarField3.constant(g, 1.0), None, p)
    assert np.allclose(pr.values, -(g.z + 0.5), atol=1e-14)
    # the surface field enters as part of the total temperature
    pr2 = reconstruct_pressure(ScalarField3.zeros(g), ScalarField2(g, np.ones((4, 4))), p)
    assert np.allclose(pr2.values, pr.values, atol=1e-14)


def test_frictional_geostrophic_balance_holds_discretely():
    # grad p + f k x v + eps v = 0 with centred differences: pressure and
    # velocity come from the same gradients, so the balance is exact
    p = PhysParams(epsilon=0.3, f0=1.0, beta=0.8)
    g = Grid(16, 16, 8)
    X, Y, Z = g.mesh()
    T = ghosted(g, p, _smooth(X, Y, Z))
    Ts = ScalarField2.from_function(g, lambda X2, Y2: 0.4 * np.cos(np.pi * X2) * np.cos(np.pi * Y2))
    vel = diagnose_v(T, Ts, p)
    pr = reconstruct_pressure(T, Ts, p).values
    px = (pr[2:] - pr[:-2])[:, 1:-1] / (2 * g.dx)
    py = (pr[:, 2:] - pr[:, :-2])[1:-1] / (2 * g.dy)
    v1, v2 = vel.v1[1:-1, 1:-1], vel.v2[1:-1, 1:-1]
    f = p.coriolis(g.y)[None, 1:-1, None]
    r1 = px - f * v2 + p.epsilon * v1
    r2 = py + f * v1 + p.epsilon * v2
    scale = np.abs(px).max() + np.abs(py).max()
    assert max(np.abs(r1).max(), np.abs(r2).max()) <= 1e-12 * scale


# -- symbolic manufactured velocity against quadrature ---------------------


def test_symbolic_velocity_matches_quadrature():
    p = default_params()
    fields = manufactured_fields(p)
    eps, f = p.epsilon, p.f0
    gam = 1 / (eps**2 + f**2)
    b = 0.5  # time factor of the second component at t = 0
    k = 2 * np.pi

    def T(x, y, z):
        zeta = np.pi * (z + 1)
        return np.cos(k * x) * np.sin(k * y) * np.cos(zeta) + b * np.sin(k * x + k * y) * np.cos(2 * zeta)

    def Tx(x, y, z):
        zeta = np.pi * (z + 1)
        return -k * np.sin(k * x) * np.sin(k * y) * np.cos(zeta) + b * k * np.cos(k * x + k * y) * np.cos(2 * zeta)

    def Ty(x, y, z):
        zeta = np.pi * (z + 1)
        return k * np.cos(k * x) * np.cos(k * y) * np.cos(zeta) + b * k * np.cos(k * x + k * y) * np.cos(2 * zeta)

    def zero_mean_column(fn, z):
        F = lambda s: quad(fn, -1, s, epsabs=1e-13)[0]  # noqa: E731
        return F(z) - quad(F, -1, 0, epsabs=1e-13)[0]

    for (x0, y0, z0) in ((0.1, 0.2, -0.3), (0.77, 0.31, -0.9), (0.45, 0.6, -0.05)):
        v1 = zero_mean_column(lambda s: gam * (eps * Tx(x0, y0, s) + f * Ty(x0, y0, s)), z0)
        v2 = zero_mean_column(lambda s: gam * (-f * Tx(x0, y0, s) + eps * Ty(x0, y0, s)), z0)
        # both components share |k|^2 = 8 pi^2, so div v = -8 pi^2 gam eps (zero-mean column integral of T)
        div = lambda s: -8 * np.pi**2 * gam * eps * zero_mean_column(lambda r: T(x0, y0, r), s)  # noqa: E731
        w = -quad(div, -1, z0, epsabs=1e-12)[0]
        assert fields["v1"](x0, y0, z0, 0.0) == pytest.approx(v1, rel=1e-8, abs=1e-10)
        assert fields["v2"](x0, y0, z0, 0.0) == pytest.approx(v2, rel=1e-8, abs=1e-10)
        assert fields["w"](x0, y0, z0, 0.0) == pytest.approx(w, rel=1e-7, abs=1e-9)
        assert fields["T"](x0, y0, z0, 0.0) == pytest.approx(T(x0, y0, z0), rel=1e-12)


def test_diagnosed_velocity_converges_to_symbolic_velocity():
    p = default_params()
    fields = manufactured_fields(p)
    errs = []
    for n in (16, 32):
        g = Grid(n, n, n // 2, lateral_mode=PER)
        X, Y, Z = g.mesh()
        vel = diagnose(ghosted(g, p, fields["T"](X, Y, Z, 0.0)), None, p)
        e1 = np.abs(vel.v1 - fields["v1"](X, Y, Z, 0.0)).max()
        Zw = np.broadcast_to(g.z_faces, (n, n, g.nz + 1))
        Xw, Yw = np.broadcast_to(X[..., :1], Zw.shape), np.broadcast_to(Y[..., :1], Zw.shape)
        e2 = np.abs(vel.w - fields["w"](Xw, Yw, Zw, 0.0)).max()
        errs.append(max(e1, e2))
    assert np.log2(errs[0] / errs[1]) >= 1.9
