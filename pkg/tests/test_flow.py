import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nemel.flow import (
    CELL,
    QUADRANT,
    FlowState,
    advection,
    body_force,
    electric_stress,
    ericksen_stress,
    kinetic_energy,
    ns_step,
    project_velocity,
)
from nemel.grid import FREESLIP, NEUMANN0, Grid, grad_cc, strain_norm_sq, velocity_divergence
from nemel.material import LeslieCoefficients, MaterialParams, Permittivity
from nemel.presets import director_from_angle, shear_cell_velocity


def _mat(eps_a=0.0):
    return MaterialParams(LeslieCoefficients(0.2, -0.6, 0.1, 1.0, 0.5, 0.3), Permittivity(1.0, eps_a))


def _inner(n):
    q = max(2, n // 8)
    return slice(q, -q), slice(q, -q)


def test_ericksen_uniform_and_plane_twist():
    g = Grid(32, 32)
    # one-sided wall stencils leave round-off only
    assert np.abs(ericksen_stress(g, director_from_angle(np.full(g.shape, 0.7)))).max() <= 1e-24
    k = 2.0
    errs = []
    for n in (32, 64):
        g = Grid(n, n)
        X, _ = g.cell_coords()
        T = ericksen_stress(g, director_from_angle(k * X))
        target = np.zeros_like(T)
        target[..., 0, 0] = k * k
        errs.append(np.abs(T - target)[_inner(n)].max())
    assert errs[0] < 1e-2 and errs[0] / errs[1] > 3.5


def test_ericksen_is_psd(rng):
    g = Grid(16, 16)
    X, Y = g.cell_coords()
    th = np.sin(3 * X + rng.normal()) * np.cos(2 * Y) + rng.normal()
    T = ericksen_stress(g, director_from_angle(th))
    assert np.linalg.eigvalsh(T).min() >= -1e-12


@pytest.mark.parametrize("form", [QUADRANT, CELL])
def test_electric_stress_examples(form):
    g = Grid(16, 16)
    d = director_from_angle(np.full(g.shape, 0.3))
    p = Permittivity(1.7, 0.0)
    assert not electric_stress(g, np.zeros(g.shape), d, p, form).any()
    X, _ = g.cell_coords()
    E = 0.8
    S = electric_stress(g, E * X, d, p, form)
    inner = (slice(1, -1), slice(1, -1))
    target = np.zeros((2, 2))
    target[0, 0] = p.eps_perp * E * E
    np.testing.assert_allclose(S[inner], np.broadcast_to(target, S[inner].shape), atol=1e-12)


def test_electric_stress_symmetric_for_isotropic_permittivity(rng):
    g = Grid(12, 12)
    d = director_from_angle(rng.uniform(0, np.pi, g.shape))
    S = electric_stress(g, rng.normal(size=g.shape), d, Permittivity(1.3, 0.0))
    assert np.abs(S - np.swapaxes(S, -1, -2)).max() <= 1e-14


def test_body_force_examples():
    g = Grid(16, 16)
    zero_Dv = np.zeros(g.shape + (2, 2))
    d = director_from_angle(np.full(g.shape, 0.2))
    fx, fy = body_force(g, d, np.zeros(g.shape), zero_Dv, np.zeros_like(d), _mat(0.5))
    assert max(np.abs(fx).max(), np.abs(fy).max()) <= 1e-24
    errs = []
    for n in (32, 64):
        g = Grid(n, n)
        X, _ = g.cell_coords()
        d = director_from_angle(2.0 * X)
        fx, fy = body_force(g, d, np.zeros(g.shape), np.zeros(g.shape + (2, 2)), np.zeros_like(d), _mat())
        errs.append(max(np.abs(fx[_inner(n)]).max(), np.abs(fy[_inner(n)]).max()))
    # the stress is constant up to O(h²) and its differences cancel
    assert max(errs) <= 1e-9


def test_zero_state_stays_zero():
    g = Grid(16, 16)
    zero = (np.zeros((17, 16)), np.zeros((16, 17)))
    s = ns_step(g, FlowState.zero(g), 1e-2, zero, 1.0)
    assert not s.u.any() and not s.v.any() and np.abs(s.pi).max() <= 1e-14


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_gradient_force_is_annihilated(seed):
    rng = np.random.default_rng(seed)
    g = Grid(12, 10)
    q = rng.normal(size=g.shape)
    force = grad_cc(g, q, NEUMANN0)
    s = ns_step(g, FlowState.zero(g), 0.1, force, 0.0, advect=False)
    assert max(np.abs(s.u).max(), np.abs(s.v).max()) <= 1e-9
    u, v, _ = project_velocity(g, *force, 1.0)
    assert max(np.abs(u).max(), np.abs(v).max()) <= 1e-9


def test_divergence_after_step(rng):
    g = Grid(16, 16)
    force = (rng.normal(size=(17, 16)), rng.normal(size=(16, 17)))
    u, v = shear_cell_velocity(g, 0.5)
    s = ns_step(g, FlowState(u, v, np.zeros(g.shape)), 1e-3, force, 1.0)
    assert s.div_inf <= 1e-9
    assert np.array_equal(s.div_inf, np.abs(velocity_divergence(g, s.u, s.v)).max())
    assert not s.u[[0, -1]].any() and not s.v[:, [0, -1]].any()


def test_advection_is_energy_neutral():
    g = Grid(20, 20)
    u, v = shear_cell_velocity(g, 1.0)
    au, av = advection(g, u, v)
    assert abs(np.sum(u * au) + np.sum(v * av)) <= 1e-12 * (np.abs(au).max() + np.abs(av).max())


def test_viscous_step_dissipates():
    g = Grid(24, 24)
    u, v = shear_cell_velocity(g, 0.5)
    a4 = 1.0
    gaps = []
    for dt in (1e-3, 5e-4, 2.5e-4):
        s = ns_step(g, FlowState(u, v, np.zeros(g.shape)), dt, (np.zeros_like(u), np.zeros_like(v)), a4)
        dk = kinetic_energy(g, s.u, s.v) - kinetic_energy(g, u, v)
        assert dk <= -dt * a4 * strain_norm_sq(g, s.u, s.v)
        gaps.append(abs(dk / dt + a4 * strain_norm_sq(g, u, v)))
    # the rate matches α4‖D(v)‖² to first order in dt
    assert 1.8 <= gaps[0] / gaps[1] <= 2.2 and 1.8 <= gaps[1] / gaps[2] <= 2.2


def test_taylor_green_decay():
    n, a4, dt, steps = 64, 1.0, 1e-3, 50
    g = Grid(n, n)
    Xu, Yu = g.xface_coords()
    Xv, Yv = g.yface_coords()
    u = np.sin(np.pi * Xu) * np.cos(np.pi * Yu)
    v = -np.cos(np.pi * Xv) * np.sin(np.pi * Yv)
    s = FlowState(u, v, np.zeros(g.shape))
    k0 = kinetic_energy(g, u, v)
    zero = (np.zeros_like(u), np.zeros_like(v))
    for _ in range(steps):
        s = ns_step(g, s, dt, zero, a4, bc=FREESLIP)
    t = steps * dt
    rate = -np.log(kinetic_energy(g, s.u, s.v) / k0) / t
    exact = 2 * 2 * np.pi**2 * (a4 / 2)
    print(f"Taylor-Green decay rate {rate:.5f} vs {exact:.5f}")
    assert abs(rate / exact - 1) <= 0.03
