import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nemel.errors import NumericalError
from nemel.grid import Grid
from nemel.material import IonSpecies, Permittivity, epsilon_tensor
from nemel.nernst_planck import (
    CENTRAL,
    SG,
    IonState,
    bernoulli,
    chemical_potential,
    log_mean,
    np_face_flux,
    np_rates,
    np_step,
)
from nemel.poisson import EllipticProblem, solve_aniso_dirichlet
from nemel.presets import shear_cell_velocity

pos = st.floats(1e-6, 1e6, allow_nan=False)


def test_chemical_potential_examples():
    g = Grid(8, 8)
    assert not chemical_potential(np.ones(g.shape), np.zeros(g.shape), 1).any()
    rng = np.random.default_rng(0)
    phi = rng.normal(size=g.shape)
    for z in (-2, 1, 3):
        assert np.abs(chemical_potential(np.exp(-z * phi), phi, z)).max() <= 1e-14
    np.testing.assert_allclose(chemical_potential(np.full(g.shape, np.e), np.zeros(g.shape), 1), 1.0, rtol=1e-15)


def test_chemical_potential_rejects_nonpositive():
    c = np.ones((4, 4))
    c[2, 1] = 0.0
    with pytest.raises(NumericalError, match=r"cell \(2, 1\)"):
        chemical_potential(c, np.zeros((4, 4)), 1)


def test_bernoulli_identities():
    x = np.linspace(-30, 30, 241)
    assert bernoulli(np.array([0.0]))[0] == 1.0
    np.testing.assert_allclose(bernoulli(x) - bernoulli(-x), -x, atol=1e-12)
    assert np.all(bernoulli(x) > 0)


@settings(max_examples=200, deadline=None)
@given(a=pos, b=pos)
def test_log_mean_properties(a, b):
    m = log_mean(a, b)
    assert min(a, b) * (1 - 1e-12) <= m <= max(a, b) * (1 + 1e-12)
    assert m == pytest.approx(float(log_mean(b, a)), rel=1e-12)
    if a != b and abs(np.log(a / b)) > 1e-2:
        assert m == pytest.approx((a - b) / (np.log(a) - np.log(b)), rel=1e-12)


def test_log_mean_continuous_across_switch():
    b = 1.3
    for x in (1e-3 * (1 - 1e-9), 1e-3 * (1 + 1e-9)):
        a = b * np.exp(x)
        assert float(log_mean(a, b)) == pytest.approx(b * np.expm1(x) / x, rel=1e-13)


def test_uncharged_uniform_has_no_flux():
    g = Grid(10, 10)
    for scheme in (SG, CENTRAL):
        Jx, Jy = np_face_flux(g, np.full(g.shape, 2.0), np.zeros(g.shape), np.eye(2), 0.0, scheme)
        assert not Jx.any() and not Jy.any()


@pytest.mark.parametrize("z", [1.0, -1.0, 2.0])
def test_boltzmann_pair_is_flux_free(z):
    g = Grid(16, 12)
    X, Y = g.cell_coords()
    phi = 1.5 * X - 0.7 * Y
    Jx, Jy = np_face_flux(g, np.exp(-z * phi), phi, np.diag([1.0, 0.4]), z, SG)
    assert max(np.abs(Jx).max(), np.abs(Jy).max()) <= 1e-13


def test_wall_normal_fluxes_vanish(rng):
    g = Grid(9, 7)
    D = np.array([[1.0, 0.3], [0.3, 0.8]])
    Jx, Jy = np_face_flux(g, rng.uniform(0.5, 2, g.shape), rng.normal(size=g.shape), D, -1.0)
    assert not Jx[[0, -1]].any() and not Jy[:, [0, -1]].any()


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), z=st.sampled_from([-2.0, -1.0, 1.0, 2.0]))
def test_sg_flux_dissipates(seed, z):
    # each SG face flux has the sign of the chemical-potential jump across the face
    rng = np.random.default_rng(seed)
    g = Grid(6, 6)
    c = rng.uniform(0.1, 3.0, g.shape)
    phi = 3 * rng.normal(size=g.shape)
    Jx, Jy = np_face_flux(g, c, phi, np.diag([0.7, 1.3]), z)
    mu = chemical_potential(c, phi, z)
    assert np.all(Jx[1:-1] * (mu[1:] - mu[:-1]) >= 0)
    assert np.all(Jy[:, 1:-1] * (mu[:, 1:] - mu[:, :-1]) >= 0)


def test_uniform_state_is_fixed_point():
    g = Grid(8, 8)
    ion = IonState.from_fields(g, np.ones((2,) + g.shape))
    sp = (IonSpecies(1, 1.0), IonSpecies(-1, 1.0))
    out = np_step(g, ion, np.zeros(g.shape), None, None, sp, 1e-3)
    assert np.array_equal(out.c, ion.c)


def test_mass_conservation_coupled(rng):
    g = Grid(32, 32)
    sp = (IonSpecies(1, 1.0), IonSpecies(-1, [[1.0, 0.2], [0.2, 0.5]]))
    X, Y = g.cell_coords()
    c = np.stack([1 + 0.3 * np.cos(np.pi * X), 1 - 0.3 * np.cos(np.pi * Y)])
    ion = IonState.from_fields(g, c)
    u, v = shear_cell_velocity(g, 0.5)
    eps = epsilon_tensor(np.array([1.0, 0.0]), Permittivity(1.0, 0.5))
    dt = 0.2 * g.hx**2
    for _ in range(1000):
        phi = solve_aniso_dirichlet(EllipticProblem(g, eps, ion.c[0] - ion.c[1]))
        ion = np_step(g, ion, phi, u, v, sp, dt)
    m = np.array([g.integrate(ck) for ck in ion.c])
    assert np.max(np.abs(m - ion.masses) / ion.masses) <= 1e-12
    assert ion.c.min() > 0


def test_heat_equation_decay_rate():
    g = Grid(64, 64)
    X, _ = g.cell_coords()
    mode = np.cos(np.pi * X)
    ion = IonState.from_fields(g, (1 + 0.5 * mode)[None])
    sp = (IonSpecies(0.0, 1.0),)
    dt = g.hx**2 / 8
    n = 1600
    for _ in range(n):
        ion = np_step(g, ion, np.zeros(g.shape), None, None, sp, dt)
    amp = np.sum((ion.c[0] - 1) * mode) / np.sum(mode * mode)
    rate = -np.log(amp / 0.5) / (n * dt)
    assert abs(rate / np.pi**2 - 1) <= 0.02


def test_positivity_failure_reports_context():
    g = Grid(8, 8)
    c = np.ones((1,) + g.shape)
    c[0, 3, 3] = 1e-3
    ion = IonState.from_fields(g, c)
    with pytest.raises(NumericalError, match="species 1 at cell"):
        np_step(g, ion, np.zeros(g.shape), None, None, (IonSpecies(0.0, 1.0),), 10.0)


def test_dissipation_nonnegative(rng):
    g = Grid(12, 12)
    c = rng.uniform(0.5, 1.5, (2,) + g.shape)
    sp = (IonSpecies(1, 1.0), IonSpecies(-1, 2.0))
    _, diss = np_rates(g, c, rng.normal(size=g.shape), None, None, sp)
    assert diss > 0
    _, diss0 = np_rates(g, np.ones((2,) + g.shape), np.zeros(g.shape), None, None, sp)
    assert diss0 == 0.0
