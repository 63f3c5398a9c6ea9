import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nemel.grid import (
    DIRICHLET0,
    FREESLIP,
    NEUMANN0,
    NOSLIP,
    Grid,
    cell_gradient,
    div_fc,
    grad_cc,
    laplacian_cc,
    laplacian_matrix,
    mirror_gradient,
    mirror_gradient_adjoint,
    pack_velocity,
    strain_and_vorticity,
    strain_norm_sq,
    unpack_velocity,
    velocity_divergence,
    velocity_gradient,
    velocity_gradient_adjoint,
    viscous_operator,
)
from nemel.presets import shear_cell_velocity


def test_grid_geometry():
    g = Grid(8, 4, 2.0, 1.0)
    assert (g.hx, g.hy, g.area, g.shape) == (0.25, 0.25, 2.0, (8, 4))
    assert g.integrate(np.ones(g.shape)) == 2.0
    X, Y = g.cell_coords()
    assert X.shape == (8, 4) and X[1, 0] == 0.375 and Y[0, 1] == 0.375
    with pytest.raises(ValueError):
        Grid(3, 8)
    with pytest.raises(ValueError):
        Grid(8, 8, 0.0, 1.0)


def test_grad_constant_and_linear():
    g = Grid(16, 12)
    X, _ = g.cell_coords()
    Fx, Fy = grad_cc(g, np.full(g.shape, 3.0))
    assert not Fx.any() and not Fy.any()
    Fx, Fy = grad_cc(g, X)
    np.testing.assert_allclose(Fx[1:-1], 1.0, rtol=0, atol=1e-13)
    assert not Fy.any()


def test_grad_quadratic_exact_at_midpoints():
    g = Grid(10, 6)
    X, _ = g.cell_coords()
    Fx, _ = grad_cc(g, X**2)
    xf = g.xface_coords()[0][1:-1]
    np.testing.assert_allclose(Fx[1:-1], 2.0 * xf, rtol=0, atol=1e-13)


def test_dirichlet_faces_reflect():
    g = Grid(4, 4)
    f = np.arange(16.0).reshape(4, 4) + 1
    Fx, Fy = grad_cc(g, f, DIRICHLET0)
    np.testing.assert_allclose(Fx[0], 2 * f[0] / g.hx)
    np.testing.assert_allclose(Fy[:, -1], -2 * f[:, -1] / g.hy)
    with pytest.raises(ValueError):
        grad_cc(g, f, "periodic")


def test_divergence_examples():
    g = Grid(12, 9)
    Fx = np.full((13, 9), 2.0)
    Fy = np.full((12, 10), -1.0)
    assert not div_fc(g, Fx, Fy).any()
    Xf, _ = g.xface_coords()
    np.testing.assert_allclose(div_fc(g, Xf, np.zeros((12, 10))), 1.0, rtol=0, atol=1e-12)


def test_summation_by_parts(rng):
    g = Grid(11, 7, 1.3, 0.6)
    f = rng.normal(size=g.shape)
    Fx = rng.normal(size=(12, 7))
    Fy = rng.normal(size=(11, 8))
    Fx[[0, -1]] = 0.0
    Fy[:, [0, -1]] = 0.0
    gx, gy = grad_cc(g, f)
    lhs = np.sum(div_fc(g, Fx, Fy) * f)
    rhs = -(np.sum(Fx * gx) + np.sum(Fy * gy))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_laplacian_neumann_constant():
    g = Grid(9, 9)
    assert np.abs(laplacian_cc(g, np.full(g.shape, 5.0), NEUMANN0)).max() == 0.0


def test_laplacian_dirichlet_convergence():
    errs = []
    for n in (16, 32, 64):
        g = Grid(n, n)
        X, Y = g.cell_coords()
        f = np.sin(np.pi * X) * np.sin(np.pi * Y)
        errs.append(np.abs(laplacian_cc(g, f, DIRICHLET0) + 2 * np.pi**2 * f).max())
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.5 <= r <= 4.5 for r in ratios), ratios


@pytest.mark.parametrize("bc", [DIRICHLET0, NEUMANN0])
def test_laplacian_symmetry_and_matrix(rng, bc):
    g = Grid(8, 6)
    f, h = rng.normal(size=g.shape), rng.normal(size=g.shape)
    a = np.sum(laplacian_cc(g, f, bc) * h)
    b = np.sum(f * laplacian_cc(g, h, bc))
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))
    A = laplacian_matrix(g, bc)
    np.testing.assert_allclose(A @ f.ravel(), laplacian_cc(g, f, bc).ravel(), rtol=1e-12, atol=1e-9)


def test_cell_gradient_second_order_everywhere():
    errs = []
    for n in (16, 32, 64):
        g = Grid(n, n)
        X, Y = g.cell_coords()
        gx, gy = cell_gradient(g, np.sin(2 * X) * np.cos(3 * Y))
        ex = np.abs(gx - 2 * np.cos(2 * X) * np.cos(3 * Y)).max()
        ey = np.abs(gy + 3 * np.sin(2 * X) * np.sin(3 * Y)).max()
        errs.append(max(ex, ey))
    assert 3.5 <= errs[0] / errs[1] <= 4.5 and 3.5 <= errs[1] / errs[2] <= 4.5


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(-3, 3))
def test_cell_gradient_exact_on_quadratics(a, b, c):
    g = Grid(7, 5, 1.0, 0.8)
    X, Y = g.cell_coords()
    gx, gy = cell_gradient(g, a * X**2 + b * X * Y + c * Y**2)
    np.testing.assert_allclose(gx, 2 * a * X + b * Y, atol=1e-11)
    np.testing.assert_allclose(gy, b * X + 2 * c * Y, atol=1e-11)


def test_mirror_adjoint(rng):
    g = Grid(7, 9)
    f = rng.normal(size=g.shape)
    ax, ay = rng.normal(size=g.shape), rng.normal(size=g.shape)
    gx, gy = mirror_gradient(g, f)
    lhs = np.sum(gx * ax) + np.sum(gy * ay)
    rhs = np.sum(f * mirror_gradient_adjoint(g, ax, ay))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def _face_field(g, fu, fv):
    Xu, Yu = g.xface_coords()
    Xv, Yv = g.yface_coords()
    return fu(Xu, Yu), fv(Xv, Yv)


def test_rigid_rotation():
    g = Grid(32, 32)
    om = 0.7
    u, v = _face_field(g, lambda x, y: -om * (y - 0.5), lambda x, y: om * (x - 0.5))
    Dv, W = strain_and_vorticity(g, u, v)
    inner = (slice(1, -1), slice(1, -1))
    assert np.abs(Dv[inner]).max() <= 1e-12
    np.testing.assert_allclose(W[inner], om, atol=1e-12)


def test_pure_shear():
    g = Grid(16, 16)
    rate = 1.5
    u, v = _face_field(g, lambda x, y: rate * y, lambda x, y: 0 * x)
    Dv, W = strain_and_vorticity(g, u, v)
    inner = (slice(1, -1), slice(1, -1))
    np.testing.assert_allclose(Dv[inner], np.broadcast_to([[0, rate / 2], [rate / 2, 0]], Dv[inner].shape), atol=1e-12)
    np.testing.assert_allclose(W[inner], -rate / 2, atol=1e-12)
    Dv0, W0 = strain_and_vorticity(g, 0 * u, 0 * v)
    assert not Dv0.any() and not W0.any()


def test_velocity_gradient_adjoint(rng):
    g = Grid(6, 5)
    u, v = rng.normal(size=(7, 5)), rng.normal(size=(6, 6))
    u[[0, -1]] = 0
    v[:, [0, -1]] = 0
    tau = rng.normal(size=g.shape + (2, 2))
    lhs = np.sum(velocity_gradient(g, u, v) * tau)
    au, av = velocity_gradient_adjoint(g, tau)
    rhs = np.sum(u * au) + np.sum(v * av)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


@pytest.mark.parametrize("bc", [NOSLIP, FREESLIP])
def test_viscous_operator_spd_and_energy(rng, bc):
    g = Grid(8, 8)
    K = viscous_operator(g, bc)
    assert abs(K - K.T).max() <= 1e-9
    u, v = shear_cell_velocity(g, 1.0)
    x = pack_velocity(u, v)
    assert x @ (K @ x) * g.cell_area == pytest.approx(strain_norm_sq(g, u, v, bc), rel=1e-12)
    assert x @ (K @ x) > 0
    uu, vv = unpack_velocity(g, x)
    assert np.array_equal(uu, u) and np.array_equal(vv, v)


def test_stream_function_velocity_is_solenoidal():
    g = Grid(20, 14, 1.0, 0.7)
    u, v = shear_cell_velocity(g, 2.0)
    assert np.abs(velocity_divergence(g, u, v)).max() <= 1e-12
    assert not u[[0, -1]].any() and not v[:, [0, -1]].any()
