import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pghd.fields import (
    Grid,
    GridMismatchError,
    GhostError,
    LateralMode,
    PhysParams,
    ScalarField2,
    ScalarField3,
    VelocityField,
    column_mean,
    coriolis_at,
    depth_integral,
    inner_l2,
    norm_l2,
)
from pghd.ghosts import fill_ghosts


@pytest.mark.parametrize(
    "f0, beta, y, expected", [(1.0, 0.0, 0.7, 1.0), (0.0, 1.0, 0.0, 0.0), (1.0, 0.5, 0.5, 1.25)]
)
def test_coriolis_at(f0, beta, y, expected):
    assert coriolis_at(PhysParams(f0=f0, beta=beta), y) == pytest.approx(expected, abs=0)


def test_gamma_is_inverse_of_f2_plus_eps2():
    p = PhysParams(epsilon=0.2, f0=0.5, beta=1.0)
    y = np.linspace(0, 1, 5)
    assert np.allclose(p.gamma(y), 1 / ((0.5 + y) ** 2 + 0.04))


@pytest.mark.parametrize("name", ["epsilon", "K_v", "K_h", "mu", "h"])
def test_params_reject_non_positive(name):
    with pytest.raises(ValueError, match=name):
        PhysParams(**{name: 0.0})


def test_params_reject_negative_alpha_and_lambda():
    with pytest.raises(ValueError):
        PhysParams(alpha=-1e-3)
    with pytest.raises(ValueError):
        PhysParams(lam=-1.0)
    # lambda = 0 is allowed: the comparison runs switch hyper-diffusion off
    assert PhysParams(lam=0.0).lam == 0.0


def test_grid_geometry():
    g = Grid(4, 5, 8, Lx=2.0, Ly=1.0, h=4.0)
    assert (g.dx, g.dy, g.dz) == (0.5, 0.2, 0.5)
    assert np.allclose(g.x, (np.arange(4) + 0.5) * 0.5)
    assert np.allclose(g.y, (np.arange(5) + 0.5) * 0.2)
    assert np.allclose(g.z, -4.0 + (np.arange(8) + 0.5) * 0.5)
    assert g.z_faces[0] == -4.0 and g.z_faces[-1] == 0.0
    assert g.volume == pytest.approx(8.0)


@pytest.mark.parametrize("shape", [(3, 8, 8), (8, 2, 8), (8, 8, 1)])
def test_grid_rejects_small_counts(shape):
    with pytest.raises(ValueError):
        Grid(*shape)


def test_field_shape_checked():
    g = Grid(4, 4, 4)
    with pytest.raises(ValueError):
        ScalarField3(g, np.zeros((4, 4, 5)))
    with pytest.raises(ValueError):
        ScalarField2(g, np.zeros((4, 5)))


def test_stencils_refuse_unfilled_ghosts():
    T = ScalarField3.zeros(Grid(4, 4, 4))
    with pytest.raises(GhostError):
        T.require_ghosts()


def test_inner_l2_unit_cube():
    g = Grid(6, 5, 4)
    one = ScalarField3.constant(g, 1.0)
    assert inner_l2(one, one) == pytest.approx(1.0, rel=1e-14)
    assert inner_l2(one, ScalarField3.zeros(g)) == 0.0


def test_inner_l2_sine_squared():
    g = Grid(64, 64, 64)
    s = ScalarField3.from_function(g, lambda X, Y, Z: np.sin(2 * np.pi * X))
    assert inner_l2(s, s) == pytest.approx(0.5, abs=1e-3)


def test_inner_l2_grid_mismatch():
    with pytest.raises(GridMismatchError):
        inner_l2(ScalarField3.zeros(Grid(4, 4, 4)), ScalarField3.zeros(Grid(5, 4, 4)))


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (4, 5, 4), elements=st.floats(-1e3, 1e3)))
def test_inner_l2_is_sum_times_cell_volume(a):
    g = Grid(4, 5, 4, Lx=0.7, Ly=1.3, h=2.0)
    R = ScalarField3(g, a)
    assert inner_l2(R, R) == pytest.approx(float(np.sum(a * a)) * g.dV, rel=1e-12, abs=1e-300)
    assert inner_l2(R, R) >= 0.0
    assert norm_l2(R) ** 2 == pytest.approx(inner_l2(R, R), rel=1e-12, abs=1e-300)


def test_depth_integral_constant_and_zero():
    g = Grid(4, 4, 8, h=2.5)
    c = ScalarField3.constant(g, 3.0)
    full = depth_integral(c, at="interfaces")[..., -1]
    assert np.allclose(full, 3.0 * 2.5)
    assert np.all(depth_integral(ScalarField3.zeros(g)) == 0.0)


def test_depth_integral_of_z():
    g = Grid(4, 4, 10)
    zf = ScalarField3.from_function(g, lambda X, Y, Z: Z + 0 * X)
    # the midpoint rule integrates a linear function exactly
    assert np.allclose(depth_integral(zf, at="interfaces")[..., -1], -0.5, atol=1e-14)


def test_depth_integral_telescopes(rng):
    g = Grid(4, 4, 7)
    # a discrete z-derivative at centres, built from interface values
    iface = rng.standard_normal((4, 4, 8))
    deriv = np.diff(iface, axis=2) / g.dz
    total = depth_integral(deriv, g, at="interfaces")
    assert np.allclose(total, iface - iface[..., :1], atol=1e-12)


def test_depth_integral_centres_are_half_cell_shifted():
    g = Grid(4, 4, 6)
    c = ScalarField3.constant(g, 1.0)
    assert np.allclose(depth_integral(c)[0, 0], g.z + g.h)


@settings(max_examples=20, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10), st.integers(0, 2**31 - 1))
def test_depth_integral_is_linear(a, b, seed):
    g = Grid(4, 4, 5)
    r = np.random.default_rng(seed)
    u, v = r.standard_normal(g.shape), r.standard_normal(g.shape)
    lhs = depth_integral(a * u + b * v, g)
    rhs = a * depth_integral(u, g) + b * depth_integral(v, g)
    assert np.allclose(lhs, rhs, atol=1e-10 * (1 + abs(a) + abs(b)))


def test_column_mean():
    g = Grid(4, 4, 4, h=2.0)
    vals = np.broadcast_to(np.arange(4.0), g.shape)
    assert np.allclose(column_mean(vals, g), 1.5)


@pytest.mark.parametrize("mode", list(LateralMode))
def test_ghost_fill_is_idempotent(mode, rng):
    g = Grid(6, 5, 4, lateral_mode=mode)
    p = PhysParams() if mode is LateralMode.PHYSICAL else PhysParams(alpha=0.0, beta=0.0)
    T = ScalarField3(g, rng.standard_normal(g.shape))
    once = fill_ghosts(T, p)
    twice = fill_ghosts(once, p)
    assert np.array_equal(once.ghosted, twice.ghosted)
    assert np.array_equal(once.values, T.values)


def test_field_arithmetic_and_extrude():
    g = Grid(4, 4, 4)
    a = ScalarField3.constant(g, 2.0)
    b = ScalarField3.constant(g, 0.5)
    assert np.all((a - b * 2.0).values == 1.0)
    assert np.all((a + b).values == 2.5)
    s = ScalarField2.from_function(g, lambda X, Y: X + Y)
    assert np.allclose(s.extrude().values[..., 2], s.values)


def test_velocity_field_shapes():
    g = Grid(4, 5, 6)
    v = VelocityField.zeros(g)
    assert v.w.shape == (4, 5, 7)
    with pytest.raises(ValueError):
        VelocityField(g, np.zeros(g.shape), np.zeros(g.shape), np.zeros(g.shape))
